#pragma once

#include <string>
#include <vector>

namespace slr::test {

/// Plain description of one image for the reference matcher.
struct BruteImage {
  std::string id;
  std::string subject;
  int day = 0;
  int index = 0;
  bool labeled = false;  // a train image with a mask
  bool unlabeled = false;
  std::vector<double> feature;
};

struct BrutePair {
  std::string labeled_id;
  std::string pseudo_id;
  double similarity = 0.0;
  int hop = 0;
};

/// Literal transcription of the image matching algorithm: for each labeled
/// seed, Compare(seed, ref) looks at ref's neighboring photographed days,
/// takes the most similar not-yet-visited image of each day, accepts it when
/// its similarity is at least the seed's running average (tau_min before the
/// first match) and tau_min, then recurses from the match. Labeled matches
/// are dropped and an image claimed by several seeds goes to the highest
/// similarity, then the smallest seed id. Images that are neither labeled
/// train nor unlabeled, and subjects without labeled images, are ignored.
std::vector<BrutePair> brute_force_pairs(const std::vector<BruteImage>& images, double tau_min);

double brute_cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace slr::test
