#include "tpc/replay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace tpc {

Eigen::Index ReplayMemory::stored() const {
  Eigen::Index n = 0;
  for (const auto& [c, s] : stores_)
    n += static_cast<Eigen::Index>(s.samples.size());
  return n;
}

std::map<ClassId, Eigen::Index> ReplayMemory::stored_per_class() const {
  std::map<ClassId, Eigen::Index> out;
  for (const auto& [c, s] : stores_)
    out[c] = static_cast<Eigen::Index>(s.samples.size());
  return out;
}

std::map<ClassId, Eigen::Index> ReplayMemory::seen_per_class() const {
  std::map<ClassId, Eigen::Index> out;
  for (const auto& [c, s] : stores_) out[c] = s.n_seen;
  return out;
}

void ReplayMemory::shrink_to(ClassStore& store, Eigen::Index quota, Rng& rng) {
  // Removing uniformly at random keeps the remaining subset uniform.
  while (static_cast<Eigen::Index>(store.samples.size()) > quota) {
    std::uniform_int_distribution<std::size_t> pick(0,
                                                    store.samples.size() - 1);
    const std::size_t victim = pick(rng);
    store.samples[victim] = std::move(store.samples.back());
    store.samples.pop_back();
  }
}

void ReplayMemory::update(const Experience& exp, Rng& rng) {
  cursor_dirty_ = true;
  for (ClassId c : exp.classes) stores_.try_emplace(c);

  // Seen counts after ingesting this experience.
  std::map<ClassId, Eigen::Index> incoming;
  for (ClassId y : exp.data.y) ++incoming[y];

  // Balanced quotas over all classes seen so far: floor + remainder spread
  // by ascending class id, then surplus of short classes redistributed.
  const auto n_cls = static_cast<Eigen::Index>(stores_.size());
  std::map<ClassId, Eigen::Index> quota;
  std::map<ClassId, Eigen::Index> will_see;
  {
    const Eigen::Index base = capacity_ / n_cls;
    Eigen::Index rem = capacity_ % n_cls;
    for (const auto& [c, s] : stores_) {
      quota[c] = base + (rem > 0 ? 1 : 0);
      if (rem > 0) --rem;
      will_see[c] = s.n_seen + (incoming.count(c) ? incoming[c] : 0);
    }
    // Greedy redistribution by ascending class id.
    bool moved = true;
    while (moved) {
      moved = false;
      Eigen::Index surplus = 0;
      for (auto& [c, q] : quota) {
        if (will_see[c] < q) {
          surplus += q - will_see[c];
          q = will_see[c];
        }
      }
      for (auto& [c, q] : quota) {
        if (surplus == 0) break;
        const Eigen::Index room = will_see[c] - q;
        if (room > 0) {
          const Eigen::Index add = std::min(room, surplus);
          q += add;
          surplus -= add;
          moved = add > 0;
        }
      }
      if (surplus == 0) break;
    }
  }

  // Group this experience's rows per class, preserving stream order.
  std::map<ClassId, std::vector<Eigen::Index>> new_rows;
  for (Eigen::Index r = 0; r < exp.data.size(); ++r)
    new_rows[exp.data.y[static_cast<std::size_t>(r)]].push_back(r);

  for (auto& [c, store] : stores_) {
    const Eigen::Index q = quota[c];
    shrink_to(store, q, rng);
    auto it = new_rows.find(c);
    if (it == new_rows.end()) continue;
    for (Eigen::Index r : it->second) {
      ++store.n_seen;
      if (static_cast<Eigen::Index>(store.samples.size()) < q) {
        store.samples.push_back(exp.data.x.row(r).transpose());
      } else if (q > 0) {
        std::uniform_int_distribution<Eigen::Index> pick(0, store.n_seen - 1);
        const Eigen::Index slot = pick(rng);
        if (slot < q)
          store.samples[static_cast<std::size_t>(slot)] =
              exp.data.x.row(r).transpose();
      }
    }
  }
}

LabeledBatch ReplayMemory::contents() const {
  LabeledBatch out;
  const Eigen::Index n = stored();
  if (n == 0) return out;
  Eigen::Index dim = 0;
  for (const auto& [c, s] : stores_)
    if (!s.samples.empty()) {
      dim = s.samples.front().size();
      break;
    }
  out.x.resize(n, dim);
  out.y.resize(static_cast<std::size_t>(n));
  Eigen::Index r = 0;
  for (const auto& [c, s] : stores_)
    for (const auto& v : s.samples) {
      out.x.row(r) = v.transpose();
      out.y[static_cast<std::size_t>(r)] = c;
      ++r;
    }
  return out;
}

LabeledBatch ReplayMemory::sample_batch(Eigen::Index n, Rng& rng) {
  LabeledBatch out;
  const Eigen::Index total = stored();
  if (total == 0 || n == 0) {
    out.y.clear();
    out.x.resize(0, 0);
    return out;
  }
  Eigen::Index dim = 0;
  for (const auto& [c, s] : stores_)
    if (!s.samples.empty()) {
      dim = s.samples.front().size();
      break;
    }
  out.x.resize(n, dim);
  out.y.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (cursor_dirty_ || cursor_ >= cursor_order_.size()) {
      cursor_order_.clear();
      for (const auto& [c, s] : stores_)
        for (std::size_t k = 0; k < s.samples.size(); ++k)
          cursor_order_.emplace_back(c, static_cast<Eigen::Index>(k));
      std::shuffle(cursor_order_.begin(), cursor_order_.end(), rng);
      cursor_ = 0;
      cursor_dirty_ = false;
    }
    const auto [c, k] = cursor_order_[cursor_++];
    out.x.row(i) =
        stores_.at(c).samples[static_cast<std::size_t>(k)].transpose();
    out.y[static_cast<std::size_t>(i)] = c;
  }
  return out;
}

void ReplayMemory::dump_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("dump_csv: cannot open " + path);
  out << "sample_id,class";
  Eigen::Index dim = 0;
  for (const auto& [c, s] : stores_)
    if (!s.samples.empty()) {
      dim = s.samples.front().size();
      break;
    }
  for (Eigen::Index i = 0; i < dim; ++i) out << ",f" << i;
  out << "\n";
  Eigen::Index id = 0;
  char buf[32];
  for (const auto& [c, s] : stores_)
    for (const auto& v : s.samples) {
      out << id++ << "," << c;
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", v(i));
        out << "," << buf;
      }
      out << "\n";
    }
}

BatchPlan batch_ratio(Eigen::Index n_s, Eigen::Index n_replay,
                      Eigen::Index total) {
  if (total < 1) throw ConfigError("batch_ratio: total must be >= 1");
  if (n_s == 0 && n_replay == 0)
    throw ConfigError("batch_ratio: n_s and n_replay cannot both be zero");
  if (n_replay == 0) return {total, 0};
  const double exact = static_cast<double>(total) *
                       static_cast<double>(n_s) /
                       static_cast<double>(n_s + n_replay);
  const auto n_mbe = static_cast<Eigen::Index>(std::llround(exact));
  return {n_mbe, total - n_mbe};
}

MinibatchComposer::MinibatchComposer(const Experience& exp, ReplayMemory* mem,
                                     BatchPlan plan)
    : exp_(exp), mem_(mem), plan_(plan) {
  order_.resize(static_cast<std::size_t>(exp.data.size()));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
}

void MinibatchComposer::begin_epoch(Rng& rng) {
  std::shuffle(order_.begin(), order_.end(), rng);
  pos_ = 0;
}

Eigen::Index MinibatchComposer::batches_per_epoch() const {
  if (plan_.n_mbe == 0) return 0;
  const Eigen::Index n = exp_.data.size();
  return n / plan_.n_mbe + (n % plan_.n_mbe != 0 ? 1 : 0);
}

LabeledBatch MinibatchComposer::next(Rng& rng) {
  LabeledBatch out;
  const auto remaining = static_cast<Eigen::Index>(order_.size() - pos_);
  if (remaining <= 0 || plan_.n_mbe == 0) {
    out.x.resize(0, 0);
    return out;
  }
  const Eigen::Index n_e = std::min(plan_.n_mbe, remaining);
  // Short final batch: scale the replay share down proportionally.
  const Eigen::Index n_r =
      (n_e == plan_.n_mbe)
          ? plan_.n_mbr
          : (plan_.n_mbr * n_e) / plan_.n_mbe;
  LabeledBatch replay;
  if (n_r > 0 && mem_ != nullptr && !mem_->empty())
    replay = mem_->sample_batch(n_r, rng);

  const Eigen::Index total = n_e + replay.size();
  out.x.resize(total, exp_.data.x.cols());
  out.y.resize(static_cast<std::size_t>(total));
  for (Eigen::Index i = 0; i < n_e; ++i) {
    const Eigen::Index r = order_[pos_++];
    out.x.row(i) = exp_.data.x.row(r);
    out.y[static_cast<std::size_t>(i)] =
        exp_.data.y[static_cast<std::size_t>(r)];
  }
  for (Eigen::Index i = 0; i < replay.size(); ++i) {
    out.x.row(n_e + i) = replay.x.row(i);
    out.y[static_cast<std::size_t>(n_e + i)] =
        replay.y[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace tpc
