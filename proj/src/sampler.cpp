#include "greyreid/sampler.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <thread>

#include "greyreid/errors.hpp"
#include "greyreid/rng.hpp"

namespace greyreid {

namespace {

using Chunk = std::vector<std::size_t>;

Chunk fresh_chunk(const std::vector<std::size_t>& pool, int K, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  Chunk c;
  for (int i = 0; i < K; ++i) c.push_back(pool[pick(rng)]);
  return c;
}

}  // namespace

std::vector<PKIndexBatch> sample_pk_batches(const std::vector<ImageRecord>& train, const ClassIndex& classes, int P,
                                            int K, std::uint64_t seed, int epoch) {
  if (P < 1 || K < 1) throw ConfigError("P and K must be positive");
  const int C = classes.num_classes();
  if (C < P) {
    throw ConfigError("PK sampling needs at least P=" + std::to_string(P) + " identities, train has " +
                      std::to_string(C));
  }
  std::vector<std::vector<std::size_t>> by_label(C);
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].is_junk()) continue;
    by_label[classes.dense(train[i].person_id())].push_back(i);
  }

  auto rng = derive_rng(seed, {kTagSampler, static_cast<std::uint64_t>(epoch)});

  std::vector<std::deque<Chunk>> chunks(C);
  for (int c = 0; c < C; ++c) {
    auto pool = by_label[c];
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t b = 0; b < pool.size(); b += K) {
      Chunk chunk(pool.begin() + b, pool.begin() + std::min(pool.size(), b + K));
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      while (static_cast<int>(chunk.size()) < K) chunk.push_back(pool[pick(rng)]);
      chunks[c].push_back(std::move(chunk));
    }
  }

  std::vector<PKIndexBatch> batches;
  std::vector<bool> used(C, false);
  auto emit = [&](const std::vector<int>& labels, auto&& chunk_for) {
    PKIndexBatch b;
    for (int label : labels) {
      used[label] = true;
      for (std::size_t idx : chunk_for(label)) {
        b.records.push_back(idx);
        b.labels.push_back(label);
      }
    }
    batches.push_back(std::move(b));
  };

  std::vector<int> available;
  for (int c = 0; c < C; ++c) available.push_back(c);
  while (static_cast<int>(available.size()) >= P) {
    std::shuffle(available.begin(), available.end(), rng);
    std::vector<int> pick(available.begin(), available.begin() + P);
    std::sort(pick.begin(), pick.end());
    emit(pick, [&](int label) {
      Chunk c = std::move(chunks[label].front());
      chunks[label].pop_front();
      return c;
    });
    available.erase(std::remove_if(available.begin(), available.end(), [&](int l) { return chunks[l].empty(); }),
                    available.end());
    std::sort(available.begin(), available.end());
  }

  // Identities that never made it into a batch get one, padded with others.
  std::vector<int> unused;
  for (int c = 0; c < C; ++c) {
    if (!used[c]) unused.push_back(c);
  }
  for (std::size_t b = 0; b < unused.size(); b += P) {
    std::vector<int> labels(unused.begin() + b, unused.begin() + std::min(unused.size(), b + P));
    std::vector<int> others;
    for (int c = 0; c < C; ++c) {
      if (std::find(labels.begin(), labels.end(), c) == labels.end()) others.push_back(c);
    }
    std::shuffle(others.begin(), others.end(), rng);
    for (std::size_t i = 0; static_cast<int>(labels.size()) < P; ++i) labels.push_back(others[i]);
    std::sort(labels.begin(), labels.end());
    emit(labels, [&](int label) {
      if (!chunks[label].empty()) {
        Chunk c = std::move(chunks[label].front());
        chunks[label].pop_front();
        return c;
      }
      return fresh_chunk(by_label[label], K, rng);
    });
  }
  return batches;
}

PKBatch materialize_batch(const PKIndexBatch& plan, const std::vector<ImageRecord>& train, ImageStore& store,
                          const AugmentConfig& cfg, std::uint64_t seed, int epoch, int step, int P, int K,
                          int workers) {
  const int n = static_cast<int>(plan.records.size());
  PKBatch batch;
  batch.rgb = Tensor({n, 3, cfg.height, cfg.width});
  batch.grey = Tensor({n, 3, cfg.height, cfg.width});
  batch.labels = plan.labels;
  batch.records = plan.records;
  batch.P = P;
  batch.K = K;
  const std::size_t per = static_cast<std::size_t>(3) * cfg.height * cfg.width;

  auto work = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      auto rng = derive_rng(seed, {kTagAugment, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(step),
                                   static_cast<std::uint64_t>(i)});
      const AugmentedPair pair = augment(store.get(train.at(plan.records[i]).image_path()), rng, cfg);
      std::copy(pair.rgb.data(), pair.rgb.data() + per, batch.rgb.data() + i * per);
      std::copy(pair.grey.data(), pair.grey.data() + per, batch.grey.data() + i * per);
    }
  };

  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1) {
    work(0, n);
    return batch;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    const int begin = n * w / workers, end = n * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return batch;
}

}  // namespace greyreid
