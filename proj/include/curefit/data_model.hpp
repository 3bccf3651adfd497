#pragma once

#include "curefit/core.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

namespace curefit {

/// One observation. `w` carries the leading intercept, `z` does not.
template <typename Scalar>
struct SubjectRecord {
  Scalar time{};
  int event = 0;
  Vec<Scalar> w;
  Vec<Scalar> z;
};

/// Which CSV columns play which role.
struct CovariateSpec {
  std::string time_column;
  std::string event_column;
  std::vector<std::string> incidence_columns;
  std::vector<std::string> latency_columns;
  std::vector<std::string> center_columns;

  /// Throws ConfigError when the spec is self-inconsistent.
  void validate() const;
};

/// Stable argsort of `time` ascending; ties keep their original order.
template <typename Scalar>
std::vector<Index> sort_by_time(const Vec<Scalar>& time) {
  std::vector<Index> idx(static_cast<std::size_t>(time.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return time(a) < time(b); });
  return idx;
}

/// Immutable, validated collection of subjects stored column-wise.
///
/// Rows keep the order they were supplied in; `sort_index()` gives the
/// ascending-time permutation every risk-set computation walks.
template <typename Scalar>
class BasicCureDataset {
 public:
  BasicCureDataset(Vec<Scalar> time, Eigen::VectorXi event, Mat<Scalar> w, Mat<Scalar> z,
                   std::vector<std::string> w_names = {}, std::vector<std::string> z_names = {})
      : time_(std::move(time)),
        event_(std::move(event)),
        w_(std::move(w)),
        z_(std::move(z)),
        w_names_(std::move(w_names)),
        z_names_(std::move(z_names)) {
    validate();
    sort_index_ = curefit::sort_by_time<Scalar>(time_);
  }

  /// Builds from records; dimensions are taken from the first record.
  static BasicCureDataset from_records(const std::vector<SubjectRecord<Scalar>>& records,
                                       std::vector<std::string> w_names = {},
                                       std::vector<std::string> z_names = {}) {
    if (records.empty()) throw DataError("dataset has no records");
    const Index n = static_cast<Index>(records.size());
    const Index q = records.front().w.size();
    const Index p = records.front().z.size();
    Vec<Scalar> t(n);
    Eigen::VectorXi e(n);
    Mat<Scalar> w(n, q), z(n, p);
    for (Index i = 0; i < n; ++i) {
      const auto& r = records[static_cast<std::size_t>(i)];
      if (r.w.size() != q || r.z.size() != p)
        throw DimensionError("record " + std::to_string(i) + " has inconsistent covariate dimensions");
      t(i) = r.time;
      e(i) = r.event;
      w.row(i) = r.w.transpose();
      z.row(i) = r.z.transpose();
    }
    return BasicCureDataset(std::move(t), std::move(e), std::move(w), std::move(z), std::move(w_names),
                            std::move(z_names));
  }

  Index size() const { return time_.size(); }
  Index w_dim() const { return w_.cols(); }
  Index z_dim() const { return z_.cols(); }

  const Vec<Scalar>& time() const { return time_; }
  const Eigen::VectorXi& event() const { return event_; }
  const Mat<Scalar>& w() const { return w_; }
  const Mat<Scalar>& z() const { return z_; }
  const std::vector<std::string>& w_names() const { return w_names_; }
  const std::vector<std::string>& z_names() const { return z_names_; }
  const std::vector<Index>& sort_index() const { return sort_index_; }

  SubjectRecord<Scalar> record(Index i) const {
    return {time_(i), event_(i), w_.row(i).transpose(), z_.row(i).transpose()};
  }

  Index event_count() const { return event_.sum(); }

  /// Largest observed event time.
  Scalar last_event_time() const {
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (Index i = 0; i < size(); ++i)
      if (event_(i) == 1) best = std::max(best, time_(i));
    return best;
  }

  /// Rows `rows` (repeats allowed), in that order.
  BasicCureDataset subset(const std::vector<Index>& rows) const {
    const Index m = static_cast<Index>(rows.size());
    Vec<Scalar> t(m);
    Eigen::VectorXi e(m);
    Mat<Scalar> w(m, w_dim()), z(m, z_dim());
    for (Index k = 0; k < m; ++k) {
      const Index i = rows[static_cast<std::size_t>(k)];
      t(k) = time_(i);
      e(k) = event_(i);
      w.row(k) = w_.row(i);
      z.row(k) = z_.row(i);
    }
    return BasicCureDataset(std::move(t), std::move(e), std::move(w), std::move(z), w_names_, z_names_);
  }

  /// Provenance kept for CSV round-trips and reporting.
  std::string time_name = "time";
  std::string event_name = "event";
  Index dropped_rows = 0;

 private:
  void validate() const {
    const Index n = time_.size();
    if (n == 0) throw DataError("dataset has no records");
    if (event_.size() != n || w_.rows() != n || z_.rows() != n)
      throw DimensionError("time, event, w and z must have the same number of rows");
    if (w_.cols() < 1) throw DimensionError("incidence design needs at least the intercept column");
    if (!w_names_.empty() && static_cast<Index>(w_names_.size()) != w_.cols())
      throw DimensionError("w_names does not match incidence dimension");
    if (!z_names_.empty() && static_cast<Index>(z_names_.size()) != z_.cols())
      throw DimensionError("z_names does not match latency dimension");
    for (Index i = 0; i < n; ++i) {
      const std::string row = "row " + std::to_string(i + 1);
      if (!std::isfinite(static_cast<double>(time_(i))) || time_(i) < Scalar(0))
        throw DataError(row + ": time must be finite and nonnegative");
      if (event_(i) != 0 && event_(i) != 1) throw DataError(row + ": event must be 0 or 1");
      if (w_(i, 0) != Scalar(1)) throw DataError(row + ": first incidence covariate must be the intercept 1");
      if (!w_.row(i).allFinite() || !z_.row(i).allFinite()) throw DataError(row + ": non-finite covariate");
    }
    if (event_.sum() == 0) throw DataError("dataset has no events");
  }

  Vec<Scalar> time_;
  Eigen::VectorXi event_;
  Mat<Scalar> w_;
  Mat<Scalar> z_;
  std::vector<std::string> w_names_;
  std::vector<std::string> z_names_;
  std::vector<Index> sort_index_;
};

using CureDataset = BasicCureDataset<double>;

/// Reads a plain comma-separated file with one header row.
///
/// Rows with a missing cell (empty, NA, NaN) in any used column are dropped
/// and counted in `dropped_rows`; centering is computed after the drop. The
/// intercept is prepended to the incidence design.
CureDataset load_csv(const std::filesystem::path& path, const CovariateSpec& spec);

/// Writes the dataset back in the layout `load_csv` accepts (time, event,
/// then the union of incidence and latency columns). Values are written in
/// shortest round-trip form.
void write_csv(const CureDataset& data, const std::filesystem::path& path);

/// CovariateSpec that re-reads a file produced by `write_csv`.
CovariateSpec covariate_spec_of(const CureDataset& data);

}  // namespace curefit
