#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ialpha/util.hpp"

namespace ialpha {

/// Point of R^n together with the point at infinity.
struct ExtPoint {
  Vec x;
  bool infinite = false;

  static ExtPoint infinity(int n) {
    ExtPoint p;
    p.x = Vec::Zero(n);
    p.infinite = true;
    return p;
  }
  static ExtPoint at(Vec v) {
    ExtPoint p;
    p.x = std::move(v);
    return p;
  }
};

/// Moebius transformation of R^n ∪ {∞} in similarity-inversion normal form:
///
///   gamma(x) = b + scale * R * iota(x - a),
///
/// where iota is the identity (a is folded into b and kept at 0) or the unit
/// inversion x -> x/|x|^2. R is orthogonal, scale > 0. Compositions and
/// inverses stay in normal form; the orthogonal factor is renormalized by
/// polar decomposition.
class MoebiusMap {
 public:
  MoebiusMap() = default;

  static MoebiusMap identity(int n);
  static MoebiusMap similarity(double scale, const Mat& rotation, const Vec& translation);
  static MoebiusMap dilation(int n, double k);
  static MoebiusMap rotation_map(const Mat& rotation);
  static MoebiusMap translation(const Vec& t);
  /// x -> x/|x|^2
  static MoebiusMap inversion(int n);
  /// General inversion-type map b + scale*R*inv(x - a).
  static MoebiusMap inversion_form(double scale, const Mat& rotation, const Vec& a,
                                   const Vec& b);
  /// Maps the exterior of the ball B(center_from, r_from) onto the interior
  /// of B(center_to, r_to); the basic Schottky pairing map.
  static MoebiusMap ball_pairing(const Vec& center_from, double r_from,
                                 const Vec& center_to, double r_to);

  int dim() const { return static_cast<int>(post_.size()); }
  bool has_inversion() const { return inversion_; }
  double scale() const { return scale_; }
  const Mat& rotation() const { return rot_; }
  const Vec& pre_translation() const { return pre_; }
  const Vec& post_translation() const { return post_; }
  bool is_identity(double tol = 1e-12) const;

  /// Total action on the extended space; poles map to infinity.
  ExtPoint operator()(const ExtPoint& p) const;
  /// Action on a finite point with finite image; throws std::domain_error at
  /// the pole.
  Vec operator()(const Vec& x) const;

  /// Point mapped to infinity (infinite itself for similarities).
  ExtPoint pole() const;
  ExtPoint image_of_infinity() const;

  MoebiusMap inverse() const;

  /// |gamma'(x)|_e, the Euclidean conformal stretch factor.
  double euclidean_derivative(const Vec& x) const;
  /// Conformal stretch in the round metric pulled back through the
  /// stereographic chart: (1+|x|^2)/(1+|gamma x|^2) * |gamma'(x)|_e.
  double spherical_derivative(const Vec& x) const;

 private:
  bool inversion_ = false;
  Mat rot_;
  double scale_ = 1.0;
  Vec pre_;   // inversion center a; zero for similarities
  Vec post_;  // b

  void renormalize();
  friend MoebiusMap compose(const MoebiusMap&, const MoebiusMap&);
};

/// a after b: (a ∘ b)(x) = a(b(x)), computed in closed form.
MoebiusMap compose(const MoebiusMap& a, const MoebiusMap& b);

/// Chordal-image signature used to tell group elements apart by their action
/// on three fixed probe points; total (well-defined across poles).
Vec action_signature(const MoebiusMap& g);

struct GroupElement {
  std::string word;
  int word_length = 0;
  MoebiusMap map;
};

enum class DomainKind { FullChart, DilationShell, Unsupported };

/// Discrete group of Moebius maps with its orbit enumeration. Enumeration is
/// performed at construction and immutable afterwards.
class KleinianGroup {
 public:
  static KleinianGroup trivial(int n);
  /// Cyclic group generated by x -> k R x; fundamental domain is the shell
  /// 1 <= |x| < k.
  static KleinianGroup cyclic_dilation(int n, double k, const Mat& rotation,
                                       int max_power = 420);
  static KleinianGroup cyclic_dilation(int n, double k, int max_power = 420);
  /// Cyclic group from an arbitrary generator.
  static KleinianGroup cyclic(const MoebiusMap& generator, int max_power = 420);
  /// Finitely generated group, enumerated breadth-first over reduced words up
  /// to the given word length, with tolerance-based deduplication.
  static KleinianGroup from_generators(std::vector<MoebiusMap> generators,
                                       int max_word_length = 8);

  int dim() const { return n_; }
  bool is_trivial() const { return generators_.empty(); }
  bool is_cyclic() const { return cyclic_; }
  const std::vector<MoebiusMap>& generators() const { return generators_; }

  /// Non-identity elements in word-length order; for each word length the
  /// element and its inverse are adjacent.
  const std::vector<GroupElement>& elements() const { return elements_; }
  int max_word_length() const { return max_word_length_; }
  /// [begin,end) ranges into elements() per word length 1..max_word_length.
  const std::vector<std::pair<int, int>>& shells() const { return shells_; }

  DomainKind domain_kind() const { return domain_; }
  /// Dilation factor k of the shell domain (only for DilationShell).
  double shell_ratio() const { return shell_ratio_; }
  /// Rotation part of the deck generator (identity for trivial groups).
  Mat deck_rotation() const;

  /// Sampled limit set: attracting fixed points of the outermost enumerated
  /// words (finite ones).
  const std::vector<Vec>& limit_point_samples() const { return limit_points_; }
  bool limit_contains_infinity() const { return limit_infinity_; }

  /// A point of the fundamental domain, usable as a default base point for
  /// Poincare-series evaluations (never a limit point).
  Vec interior_point() const;

 private:
  int n_ = 0;
  bool cyclic_ = false;
  std::vector<MoebiusMap> generators_;
  std::vector<GroupElement> elements_;
  std::vector<std::pair<int, int>> shells_;
  int max_word_length_ = 0;
  DomainKind domain_ = DomainKind::Unsupported;
  double shell_ratio_ = 0.0;
  std::vector<Vec> limit_points_;
  bool limit_infinity_ = false;

  void enumerate_cyclic(int max_power);
  void enumerate_words(int max_word_length);
  void sample_limit_set();
};

struct PoincareSum {
  double sum = 0.0;
  double tail_bound = 0.0;
  bool divergent = false;
  std::vector<double> shell_sums;
};

/// Partial sum over non-identity elements of |gamma'(x)|^s in the spherical
/// norm, up to the given word length, with a geometric tail extrapolation.
PoincareSum poincare_sum(const KleinianGroup& group, double s, const Vec& x, int cutoff);

/// Estimate of the critical exponent: the s at which the word-length shell
/// sums stop decaying, located by bisection on the fitted decay rate.
double exponent_estimate(const KleinianGroup& group, const Vec& base_point);
double exponent_estimate(const KleinianGroup& group);

}  // namespace ialpha
