#include "ialpha/mobius.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace ialpha {

namespace {

Vec invert_vec(const Vec& v) { return v / v.squaredNorm(); }

Mat polar_orthogonal(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

void MoebiusMap::renormalize() {
  if (scale_ <= 0.0 || !std::isfinite(scale_))
    throw std::invalid_argument("MoebiusMap: scale must be positive and finite");
  double drift = (rot_.transpose() * rot_ - Mat::Identity(dim(), dim()))
                     .cwiseAbs()
                     .maxCoeff();
  if (drift > 1e-8)
    throw std::invalid_argument("MoebiusMap: rotation is not orthogonal");
  if (drift > 1e-15) rot_ = polar_orthogonal(rot_);
  if (!inversion_ && pre_.cwiseAbs().maxCoeff() > 0.0) {
    // Fold the pre-translation of a similarity into b.
    post_ -= scale_ * (rot_ * pre_);
    pre_.setZero();
  }
}

MoebiusMap MoebiusMap::identity(int n) {
  MoebiusMap g;
  g.inversion_ = false;
  g.rot_ = Mat::Identity(n, n);
  g.scale_ = 1.0;
  g.pre_ = Vec::Zero(n);
  g.post_ = Vec::Zero(n);
  return g;
}

MoebiusMap MoebiusMap::similarity(double scale, const Mat& rotation, const Vec& translation) {
  MoebiusMap g;
  g.inversion_ = false;
  g.rot_ = rotation;
  g.scale_ = scale;
  g.pre_ = Vec::Zero(translation.size());
  g.post_ = translation;
  g.renormalize();
  return g;
}

MoebiusMap MoebiusMap::dilation(int n, double k) {
  return similarity(k, Mat::Identity(n, n), Vec::Zero(n));
}

MoebiusMap MoebiusMap::rotation_map(const Mat& rotation) {
  return similarity(1.0, rotation, Vec::Zero(rotation.rows()));
}

MoebiusMap MoebiusMap::translation(const Vec& t) {
  return similarity(1.0, Mat::Identity(t.size(), t.size()), t);
}

MoebiusMap MoebiusMap::inversion(int n) {
  return inversion_form(1.0, Mat::Identity(n, n), Vec::Zero(n), Vec::Zero(n));
}

MoebiusMap MoebiusMap::inversion_form(double scale, const Mat& rotation, const Vec& a,
                                      const Vec& b) {
  MoebiusMap g;
  g.inversion_ = true;
  g.rot_ = rotation;
  g.scale_ = scale;
  g.pre_ = a;
  g.post_ = b;
  g.renormalize();
  return g;
}

MoebiusMap MoebiusMap::ball_pairing(const Vec& center_from, double r_from,
                                    const Vec& center_to, double r_to) {
  // |x - c1| = r1 maps to |y - c2| = r2, exterior to interior.
  return inversion_form(r_from * r_to, Mat::Identity(center_from.size(), center_from.size()),
                        center_from, center_to);
}

bool MoebiusMap::is_identity(double tol) const {
  if (inversion_) return false;
  return std::abs(scale_ - 1.0) <= tol && post_.cwiseAbs().maxCoeff() <= tol &&
         (rot_ - Mat::Identity(dim(), dim())).cwiseAbs().maxCoeff() <= tol;
}

ExtPoint MoebiusMap::operator()(const ExtPoint& p) const {
  int n = dim();
  if (p.infinite) return image_of_infinity();
  if (inversion_) {
    Vec w = p.x - pre_;
    double w2 = w.squaredNorm();
    if (w2 == 0.0) return ExtPoint::infinity(n);
    return ExtPoint::at(post_ + (scale_ / w2) * (rot_ * w));
  }
  return ExtPoint::at(post_ + scale_ * (rot_ * p.x));
}

Vec MoebiusMap::operator()(const Vec& x) const {
  ExtPoint p = (*this)(ExtPoint::at(x));
  if (p.infinite) throw std::domain_error("MoebiusMap: image at infinity (pole input)");
  return p.x;
}

ExtPoint MoebiusMap::pole() const {
  if (inversion_) return ExtPoint::at(pre_);
  return ExtPoint::infinity(dim());
}

ExtPoint MoebiusMap::image_of_infinity() const {
  if (inversion_) return ExtPoint::at(post_);
  return ExtPoint::infinity(dim());
}

MoebiusMap MoebiusMap::inverse() const {
  MoebiusMap g;
  int n = dim();
  if (!inversion_) {
    g.inversion_ = false;
    g.rot_ = rot_.transpose();
    g.scale_ = 1.0 / scale_;
    g.pre_ = Vec::Zero(n);
    g.post_ = -(g.scale_ * (g.rot_ * post_));
    return g;
  }
  // y = b + sR inv(x - a)  =>  x = a + sR^T inv(y - b)
  g.inversion_ = true;
  g.rot_ = rot_.transpose();
  g.scale_ = scale_;
  g.pre_ = post_;
  g.post_ = pre_;
  return g;
}

double MoebiusMap::euclidean_derivative(const Vec& x) const {
  if (!inversion_) return scale_;
  double w2 = (x - pre_).squaredNorm();
  if (w2 == 0.0) throw std::domain_error("MoebiusMap: derivative at the pole");
  return scale_ / w2;
}

double MoebiusMap::spherical_derivative(const Vec& x) const {
  Vec gx = (*this)(x);
  return (1.0 + x.squaredNorm()) / (1.0 + gx.squaredNorm()) * euclidean_derivative(x);
}

MoebiusMap compose(const MoebiusMap& a, const MoebiusMap& b) {
  int n = a.dim();
  if (b.dim() != n) throw std::invalid_argument("compose: dimension mismatch");
  MoebiusMap g;

  if (!a.inversion_ && !b.inversion_) {
    g.inversion_ = false;
    g.scale_ = a.scale_ * b.scale_;
    g.rot_ = a.rot_ * b.rot_;
    g.pre_ = Vec::Zero(n);
    g.post_ = a.post_ + a.scale_ * (a.rot_ * b.post_);
  } else if (!a.inversion_ && b.inversion_) {
    g.inversion_ = true;
    g.scale_ = a.scale_ * b.scale_;
    g.rot_ = a.rot_ * b.rot_;
    g.pre_ = b.pre_;
    g.post_ = a.post_ + a.scale_ * (a.rot_ * b.post_);
  } else if (a.inversion_ && !b.inversion_) {
    // a(b(x)) = b_a + (s_a/s_b) R_a R_b inv(x - a'), a' = R_b^T (a_a - b_b)/s_b
    g.inversion_ = true;
    g.scale_ = a.scale_ / b.scale_;
    g.rot_ = a.rot_ * b.rot_;
    g.pre_ = (b.rot_.transpose() * (a.pre_ - b.post_)) / b.scale_;
    g.post_ = a.post_;
  } else {
    // Both inversion type. With w = x - a_b and c = R_b^T (b_b - a_a)/s_b:
    //   inv(inv(w) + c) = inv(c) + |c|^{-2} (I - 2 c^ c^T/|c|^2) inv(w + inv(c)).
    Vec c = (b.rot_.transpose() * (b.post_ - a.pre_)) / b.scale_;
    double c2 = c.squaredNorm();
    if (c2 < 1e-280) {
      // b maps a_b-centered inversions straight into the pole of a: similarity.
      g.inversion_ = false;
      g.scale_ = a.scale_ / b.scale_;
      g.rot_ = a.rot_ * b.rot_;
      g.pre_ = Vec::Zero(n);
      g.post_ = a.post_ - g.scale_ * (g.rot_ * b.pre_);
    } else {
      Vec ic = c / c2;
      Mat house = Mat::Identity(n, n) - (2.0 / c2) * (c * c.transpose());
      g.inversion_ = true;
      g.scale_ = a.scale_ / (b.scale_ * c2);
      g.rot_ = a.rot_ * b.rot_ * house;
      g.pre_ = b.pre_ - ic;
      g.post_ = a.post_ + (a.scale_ / b.scale_) * (a.rot_ * (b.rot_ * ic));
    }
  }
  g.renormalize();
  return g;
}

Vec action_signature(const MoebiusMap& g) {
  int n = g.dim();
  // Three fixed probes; images are chordally embedded so poles stay finite.
  Mat probes(3, n);
  for (int j = 0; j < n; ++j) {
    probes(0, j) = 0.1 + 0.05 * j;
    probes(1, j) = (j % 2 ? -0.4 : 1.2) + 0.03 * j;
    probes(2, j) = (j % 2 ? 0.9 : -0.6) - 0.04 * j;
  }
  Vec sig(3 * (n + 1));
  for (int i = 0; i < 3; ++i) {
    ExtPoint img = g(ExtPoint::at(probes.row(i).transpose()));
    Vec lift(n + 1);
    if (img.infinite) {
      lift.setZero();
      lift[n] = 1.0;
    } else {
      double d = 1.0 + img.x.squaredNorm();
      lift.head(n) = 2.0 * img.x / d;
      lift[n] = (img.x.squaredNorm() - 1.0) / d;
    }
    sig.segment(i * (n + 1), n + 1) = lift;
  }
  return sig;
}

KleinianGroup KleinianGroup::trivial(int n) {
  KleinianGroup g;
  g.n_ = n;
  g.domain_ = DomainKind::FullChart;
  return g;
}

KleinianGroup KleinianGroup::cyclic_dilation(int n, double k, const Mat& rotation,
                                             int max_power) {
  if (k <= 1.0) throw std::invalid_argument("cyclic_dilation: k must exceed 1");
  KleinianGroup g;
  g.n_ = n;
  g.cyclic_ = true;
  g.generators_.push_back(MoebiusMap::similarity(k, rotation, Vec::Zero(n)));
  g.domain_ = DomainKind::DilationShell;
  g.shell_ratio_ = k;
  g.enumerate_cyclic(max_power);
  g.limit_points_.push_back(Vec::Zero(n));
  g.limit_infinity_ = true;
  return g;
}

KleinianGroup KleinianGroup::cyclic_dilation(int n, double k, int max_power) {
  return cyclic_dilation(n, k, Mat::Identity(n, n), max_power);
}

KleinianGroup KleinianGroup::cyclic(const MoebiusMap& generator, int max_power) {
  KleinianGroup g;
  g.n_ = generator.dim();
  g.cyclic_ = true;
  g.generators_.push_back(generator);
  if (!generator.has_inversion() && generator.post_translation().norm() == 0.0 &&
      generator.scale() > 1.0) {
    g.domain_ = DomainKind::DilationShell;
    g.shell_ratio_ = generator.scale();
  } else {
    g.domain_ = DomainKind::Unsupported;
  }
  g.enumerate_cyclic(max_power);
  g.sample_limit_set();
  return g;
}

KleinianGroup KleinianGroup::from_generators(std::vector<MoebiusMap> generators,
                                             int max_word_length) {
  if (generators.empty()) throw std::invalid_argument("from_generators: no generators");
  KleinianGroup g;
  g.n_ = generators.front().dim();
  g.generators_ = std::move(generators);
  g.domain_ = DomainKind::Unsupported;
  g.enumerate_words(max_word_length);
  g.sample_limit_set();
  return g;
}

void KleinianGroup::enumerate_cyclic(int max_power) {
  const MoebiusMap& gen = generators_.front();
  MoebiusMap pow = gen;
  elements_.clear();
  shells_.clear();
  for (int m = 1; m <= max_power; ++m) {
    int begin = static_cast<int>(elements_.size());
    elements_.push_back({std::string(m, 'a'), m, pow});
    elements_.push_back({std::string(m, 'A'), m, pow.inverse()});
    shells_.emplace_back(begin, begin + 2);
    if (m < max_power) pow = compose(gen, pow);
  }
  max_word_length_ = max_power;
}

void KleinianGroup::enumerate_words(int max_word_length) {
  const int g = static_cast<int>(generators_.size());
  std::vector<MoebiusMap> letters;
  std::vector<std::string> names;
  for (int i = 0; i < g; ++i) {
    letters.push_back(generators_[i]);
    names.push_back(std::string(1, static_cast<char>('a' + i)));
    letters.push_back(generators_[i].inverse());
    names.push_back(std::string(1, static_cast<char>('A' + i)));
  }
  auto cancels = [](char last, char next) {
    return (std::tolower(last) == std::tolower(next)) && last != next;
  };

  elements_.clear();
  shells_.clear();
  std::vector<Vec> signatures;
  signatures.push_back(action_signature(MoebiusMap::identity(n_)));
  auto seen = [&](const Vec& sig) {
    for (const auto& s : signatures)
      if ((s - sig).cwiseAbs().maxCoeff() <= 1e-8) return true;
    return false;
  };

  std::vector<GroupElement> frontier;
  for (int i = 0; i < 2 * g; ++i) {
    GroupElement e{names[i], 1, letters[i]};
    Vec sig = action_signature(e.map);
    if (seen(sig)) continue;
    signatures.push_back(sig);
    frontier.push_back(e);
  }
  int level = 1;
  while (!frontier.empty() && level <= max_word_length) {
    int begin = static_cast<int>(elements_.size());
    for (auto& e : frontier) elements_.push_back(e);
    shells_.emplace_back(begin, static_cast<int>(elements_.size()));
    if (level == max_word_length) break;
    std::vector<GroupElement> next;
    for (const auto& e : frontier) {
      for (int i = 0; i < 2 * g; ++i) {
        if (cancels(e.word.back(), names[i][0])) continue;
        GroupElement ne{e.word + names[i], level + 1, compose(e.map, letters[i])};
        Vec sig = action_signature(ne.map);
        if (seen(sig)) continue;
        signatures.push_back(sig);
        next.push_back(std::move(ne));
      }
    }
    frontier = std::move(next);
    ++level;
  }
  max_word_length_ = static_cast<int>(shells_.size());
}

void KleinianGroup::sample_limit_set() {
  limit_points_.clear();
  limit_infinity_ = false;
  if (shells_.empty()) return;
  auto [begin, end] = shells_.back();
  Vec seed = Vec::Constant(n_, 0.17);
  for (int idx = begin; idx < end; ++idx) {
    ExtPoint z = ExtPoint::at(seed);
    for (int it = 0; it < 60; ++it) {
      z = elements_[idx].map(z);
      if (!z.infinite && z.x.norm() > 1e9) {
        z.infinite = true;
        break;
      }
    }
    if (z.infinite) {
      limit_infinity_ = true;
      continue;
    }
    bool dup = false;
    for (const auto& p : limit_points_)
      if ((p - z.x).norm() < 1e-6) {
        dup = true;
        break;
      }
    if (!dup) limit_points_.push_back(z.x);
  }
}

Mat KleinianGroup::deck_rotation() const {
  if (generators_.empty()) return Mat::Identity(n_, n_);
  return generators_.front().rotation();
}

Vec KleinianGroup::interior_point() const {
  Vec p = Vec::Zero(n_);
  if (domain_ == DomainKind::DilationShell) {
    p[0] = 0.9 * std::sqrt(shell_ratio_);
    p[n_ - 1] = 0.35;
    return p;
  }
  // Away from sampled limit points.
  p[0] = 1.3;
  p[n_ - 1] = 0.4;
  for (int tries = 0; tries < 32; ++tries) {
    bool clear = true;
    for (const auto& l : limit_points_)
      if ((l - p).norm() < 0.5) clear = false;
    if (clear) return p;
    p[0] += 0.7;
    p[1 % n_] -= 0.3;
  }
  return p;
}

PoincareSum poincare_sum(const KleinianGroup& group, double s, const Vec& x, int cutoff) {
  if (s <= 0.0) throw std::invalid_argument("poincare_sum: s must be positive");
  if (cutoff < 1) throw std::invalid_argument("poincare_sum: cutoff must be >= 1");
  PoincareSum out;
  if (group.is_trivial()) return out;
  cutoff = std::min(cutoff, group.max_word_length());
  const auto& shells = group.shells();
  const auto& elems = group.elements();
  for (int l = 0; l < cutoff && l < static_cast<int>(shells.size()); ++l) {
    double shell = 0.0;
    for (int i = shells[l].first; i < shells[l].second; ++i)
      shell += std::pow(elems[i].map.spherical_derivative(x), s);
    out.shell_sums.push_back(shell);
    out.sum += shell;
  }
  // Geometric extrapolation of the remaining shells.
  if (out.shell_sums.size() >= 2) {
    double last = out.shell_sums.back();
    double prev = out.shell_sums[out.shell_sums.size() - 2];
    double ratio = prev > 0.0 ? last / prev : 0.0;
    if (ratio >= 1.0) {
      out.divergent = true;
      out.tail_bound = std::numeric_limits<double>::infinity();
    } else {
      out.tail_bound = last * ratio / (1.0 - ratio);
    }
  }
  return out;
}

namespace {

// Least-squares slope of log(shell sums) against word length; decay rate is
// the negated slope.
double shell_decay_rate(const KleinianGroup& group, double s, const Vec& x) {
  PoincareSum ps = poincare_sum(group, s, x, group.max_word_length());
  int m = static_cast<int>(ps.shell_sums.size());
  if (m < 4) throw std::runtime_error("exponent_estimate: fewer than 4 shells enumerated");
  double sl = 0, sy = 0, sll = 0, sly = 0;
  for (int l = 0; l < m; ++l) {
    double y = std::log(std::max(ps.shell_sums[l], 1e-300));
    sl += l;
    sy += y;
    sll += double(l) * l;
    sly += l * y;
  }
  double slope = (m * sly - sl * sy) / (m * sll - sl * sl);
  return -slope;
}

}  // namespace

double exponent_estimate(const KleinianGroup& group, const Vec& base_point) {
  if (group.is_trivial()) return 0.0;
  if (group.max_word_length() < 4)
    throw std::runtime_error("exponent_estimate: enumeration too shallow");
  double lo = 1e-6;
  if (shell_decay_rate(group, lo, base_point) > 0.0) return 0.0;
  double hi = 1.0;
  while (shell_decay_rate(group, hi, base_point) <= 0.0 && hi < 64.0) hi *= 2.0;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    if (shell_decay_rate(group, mid, base_point) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

double exponent_estimate(const KleinianGroup& group) {
  return exponent_estimate(group, group.interior_point());
}

}  // namespace ialpha
