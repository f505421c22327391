#include "slr/image.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "slr/error.hpp"

namespace slr {
namespace {

struct PnmHeader {
  char kind = 0;  // '5' or '6'
  int width = 0;
  int height = 0;
  int maxval = 0;
};

// Reads one header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n' && ch != '\r') ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  while (ch != EOF && !std::isspace(ch) && ch != '#') {
    token.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  // The single whitespace after maxval is consumed here; a '#' directly
  // after a token is pushed back so the comment is skipped next time.
  if (ch == '#') in.unget();
  return token;
}

int parse_positive(const std::string& token, const std::filesystem::path& path, const char* what) {
  if (token.empty()) throw_validation(path.string() + ": truncated netpbm header (" + what + ")");
  for (char c : token) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw_validation(path.string() + ": bad " + what + " '" + token + "' in netpbm header");
    }
  }
  if (token.size() > 9) throw_validation(path.string() + ": " + what + " too large");
  const int v = std::stoi(token);
  if (v <= 0) throw_validation(path.string() + ": " + what + " must be positive");
  return v;
}

PnmHeader read_header(std::istream& in, const std::filesystem::path& path, char expected) {
  PnmHeader h;
  const std::string magic = next_token(in);
  if (magic.size() != 2 || magic[0] != 'P' || magic[1] != expected) {
    throw_validation(path.string() + ": expected binary P" + std::string(1, expected) +
                     " netpbm file, found '" + magic + "'");
  }
  h.kind = expected;
  h.width = parse_positive(next_token(in), path, "width");
  h.height = parse_positive(next_token(in), path, "height");
  h.maxval = parse_positive(next_token(in), path, "maxval");
  if (h.maxval > 255) {
    throw_validation(path.string() + ": only 8-bit netpbm files are supported (maxval " +
                     std::to_string(h.maxval) + ")");
  }
  return h;
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_validation("cannot open " + path.string());
  return in;
}

void read_payload(std::istream& in, std::vector<std::uint8_t>& out, const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (static_cast<std::size_t>(in.gcount()) != out.size()) {
    throw_validation(path.string() + ": truncated pixel data (expected " + std::to_string(out.size()) +
                     " bytes, got " + std::to_string(in.gcount()) + ")");
  }
}

void write_file(const std::filesystem::path& path, const std::string& header,
                const std::vector<std::uint8_t>& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_runtime("cannot write " + path.string());
  out << header;
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw_runtime("write failed for " + path.string());
}

}  // namespace

void LabelMask::validate() const {
  if (width <= 0 || height <= 0) throw_validation("label mask has zero area");
  if (classes < 2) throw_validation("label mask needs at least 2 classes, got " + std::to_string(classes));
  if (labels.size() != static_cast<std::size_t>(width) * height) {
    throw_validation("label mask buffer does not match its dimensions");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw_validation("label mask pixel " + std::to_string(i) + " has class " + std::to_string(labels[i]) +
                       " >= " + std::to_string(classes));
    }
  }
}

RgbImage read_ppm(const std::filesystem::path& path) {
  auto in = open_binary(path);
  const PnmHeader h = read_header(in, path, '6');
  RgbImage image(h.width, h.height);
  read_payload(in, image.pixels, path);
  return image;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  if (image.empty()) throw_runtime("refusing to write empty image to " + path.string());
  write_file(path, "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n",
             image.pixels);
}

GrayImage read_pgm(const std::filesystem::path& path) {
  auto in = open_binary(path);
  const PnmHeader h = read_header(in, path, '5');
  GrayImage image{h.width, h.height, std::vector<std::uint8_t>(static_cast<std::size_t>(h.width) * h.height)};
  read_payload(in, image.pixels, path);
  return image;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  write_file(path, "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n",
             image.pixels);
}

LabelMask read_mask(const std::filesystem::path& path, int classes) {
  GrayImage gray = read_pgm(path);
  LabelMask mask;
  mask.width = gray.width;
  mask.height = gray.height;
  mask.classes = classes;
  mask.labels = std::move(gray.pixels);
  try {
    mask.validate();
  } catch (const Error& e) {
    throw_validation(path.string() + ": " + e.what());
  }
  return mask;
}

void write_mask(const std::filesystem::path& path, const LabelMask& mask) {
  write_pgm(path, GrayImage{mask.width, mask.height, mask.labels});
}

RgbImage resize_nearest(const RgbImage& image, int width, int height) {
  if (image.width == width && image.height == height) return image;
  RgbImage out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * image.height / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>(static_cast<long long>(x) * image.width / width);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(sx, sy, c);
    }
  }
  return out;
}

LabelMask resize_nearest(const LabelMask& mask, int width, int height) {
  if (mask.width == width && mask.height == height) return mask;
  LabelMask out(width, height, mask.classes);
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * mask.height / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>(static_cast<long long>(x) * mask.width / width);
      out.at(x, y) = mask.at(sx, sy);
    }
  }
  return out;
}

}  // namespace slr
