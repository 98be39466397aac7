#include "eps/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "eps/autocache.hpp"
#include "eps/chunks.hpp"
#include "eps/log.hpp"

namespace eps {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Sum of Table-3-style overheads along the halving path old -> new.
double transition_overhead_path(const CostModel& cm, int old_k, int new_k) {
  double total = 0.0;
  for (int k = old_k; k > new_k; k /= 2) total += cm.transition_overhead(k, k / 2);
  return total;
}

const char* kind_name(BlockKind k) {
  switch (k) {
    case BlockKind::kForward: return "F";
    case BlockKind::kBackward: return "B";
    case BlockKind::kUpdate: return "U";
    case BlockKind::kTransfer: return "XFER";
    case BlockKind::kAllReduce: return "AR";
  }
  return "?";
}

void append_timeline(RunResult& out, const IterationSchedule& sched, int epoch,
                     double epoch_start) {
  for (const TimedBlock& b : sched.blocks) {
    TimelineEntry e;
    e.device = b.device;
    e.kind = kind_name(b.kind);
    e.start = epoch_start + b.start;
    e.end = epoch_start + b.end;
    std::string tag = "e" + std::to_string(epoch);
    if (b.micro_batch >= 0) tag += ":mb" + std::to_string(b.micro_batch);
    if (b.bucket >= 0) tag += ":bucket" + std::to_string(b.bucket);
    e.tag = tag;
    out.timeline.push_back(std::move(e));
  }
}

struct BaselineRun {
  PartitionPlan plan;
  SublayerSeq seq;
  int micro_batches = 0;
  IterationSchedule iteration;
  double iterations_per_epoch = 0.0;
  double epoch_seconds = 0.0;
  double total_seconds = 0.0;
};

BaselineRun build_baseline(const ScenarioConfig& cfg) {
  BaselineRun base;
  const int k0 = cfg.pipeline_length_at_start();
  const Topology topo(cfg.cluster, k0);
  base.seq = m_partition(cfg.model, 0);
  base.plan = load_balance(base.seq, k0, cfg.training.lambda_frozen,
                           cfg.balance_criterion);
  const ChunkProfile profile = optimal_chunks(
      base.plan, cfg.model, base.seq, cfg.training.per_pipeline_batch,
      topo.replica_width(), cfg.cluster, cfg.cost, false, 0.0);
  base.micro_batches = profile.chosen;
  base.iteration = schedule_iteration(
      base.plan, cfg.model, base.seq, base.micro_batches,
      cfg.training.per_pipeline_batch, topo.replica_width(), cfg.cluster,
      cfg.cost, false, 0.0);
  const double dataset = static_cast<double>(cfg.training.iterations_per_epoch) *
                         cfg.training.per_pipeline_batch * topo.replica_width();
  base.iterations_per_epoch =
      dataset / (cfg.training.per_pipeline_batch * topo.replica_width());
  base.epoch_seconds = base.iterations_per_epoch * base.iteration.makespan;
  base.total_seconds =
      cfg.cost.init_overhead() + cfg.training.epochs * base.epoch_seconds;
  return base;
}

}  // namespace

RunResult simulate_run(const ScenarioConfig& cfg) {
  cfg.validate();
  const ModelSpec& model = cfg.model;
  const int layers = model.layer_count();
  const int k0 = cfg.pipeline_length_at_start();

  const BaselineRun base = build_baseline(cfg);
  const double m_gpu_initial = base.plan.max_effective_size();
  const int r0 = Topology(cfg.cluster, k0).replica_width();
  const double dataset = static_cast<double>(cfg.training.iterations_per_epoch) *
                         cfg.training.per_pipeline_batch * r0;

  RunResult out;
  out.baseline_total_seconds = base.total_seconds;

  std::unique_ptr<GradNormSource> norms;
  if (cfg.features.freeze) norms = make_grad_norm_source(cfg);

  FreezeState freeze_state(cfg.training.alpha);
  Topology topo(cfg.cluster, k0);
  int k = k0;
  SublayerSeq seq = base.seq;
  PartitionPlan plan = base.plan;
  int micro_batches = base.micro_batches;
  CacheState cache;
  cache.tiers = cfg.cache_tiers;
  int l_frozen = 0;
  TrainingProgress progress;

  const bool elastic = cfg.features.autopipe;
  double clock = 0.0;

  for (int epoch = 0; epoch < cfg.training.epochs; ++epoch) {
    EpochRow row;
    row.epoch = epoch;
    if (epoch == 0) row.transition_overhead += cfg.cost.init_overhead();

    const bool check_freeze = cfg.features.freeze && epoch > 0 &&
                              epoch % cfg.training.freeze_check_interval == 0;
    bool plan_changed = false;
    if (check_freeze) {
      const GradNormVector g = norms->at_epoch(epoch - 1);
      const int next = next_frozen_count(freeze_state, g, layers);
      if (next != l_frozen) {
        l_frozen = next;
        plan_changed = true;
        progress.epoch = epoch;
        progress.frozen_layers = l_frozen;
        progress.lr_schedule_position =
            static_cast<double>(epoch) / cfg.training.epochs;
        progress.weights_version = "v" + std::to_string(epoch);
        seq = m_partition(model, l_frozen);

        if (elastic) {
          const int old_k = k;
          // Fewer active sublayers than devices leaves no feasible plan;
          // shrink first, then let the memory criterion compress further.
          while (k > 1 && static_cast<int>(seq.active.size()) < k) k /= 2;
          CompressionResult comp = try_compress(seq, k, cfg.training.lambda_frozen,
                                                m_gpu_initial, cfg.balance_criterion);
          k = comp.pipeline_length;
          plan = std::move(comp.plan);
          if (k != old_k) {
            row.transition_overhead += transition_overhead_path(cfg.cost, old_k, k);
            log_info("epoch %d: pipeline compressed %d -> %d", epoch, old_k, k);
            if (cfg.features.autodp) {
              TransitionResult tr = transition(topo, k, progress);
              TransitionLog tl;
              tl.epoch = epoch;
              tl.old_k = old_k;
              tl.new_k = k;
              for (const TransitionMessage& m : tr.messages)
                tl.activated_ranks.push_back(m.receiver);
              tl.messages = tr.messages;
              out.transitions.push_back(std::move(tl));
              row.transition_overhead +=
                  cfg.dp_message_latency * static_cast<double>(tr.messages.size());
              topo = tr.topology;
            }
          }
        }
      }
    }

    const int r = cfg.features.autodp ? topo.replica_width() : r0;
    const double shard_samples = dataset / r;

    // Cache decision for this epoch; the boundary trails L_frozen.
    double read_per_sample = 0.0;
    if (elastic && cfg.features.autocache &&
        cfg.cache_policy != CachePolicy::kAlwaysOff && l_frozen > 0) {
      const CacheDecision decision =
          should_cache(l_frozen, model, cfg.cost, cfg.cache_tiers,
                       cfg.training.per_pipeline_batch / micro_batches);
      const bool want =
          cfg.cache_policy == CachePolicy::kAlwaysOn ? true : decision.enable;
      if (want && (!cache.enabled || cache.boundary_layer < l_frozen)) {
        const int old_boundary = cache.enabled ? cache.boundary_layer : 0;
        auto [next_state, cost] =
            cache_transition(cache, old_boundary, l_frozen, model, cfg.cost);
        if (!cache.enabled)
          out.cache_events.push_back({epoch, "enable", 0.0, 0.0});
        cache = next_state;
        const double new_read =
            cache_read_seconds_per_sample(model, l_frozen, cfg.cache_tiers);
        // Cost of the boundary move relative to steady-state reading, per
        // sample, charged once per shard sample this epoch.
        row.cache_transition_time =
            (cost.critical_path_per_sample() - new_read) * shard_samples;
        out.frozen_forward_per_sample += cost.compute_seconds_per_sample;
        out.cache_events.push_back(
            {epoch, "transition",
             static_cast<double>(model.boundary_bytes(2 * l_frozen)),
             cost.total_per_sample() * shard_samples});
      }
    }
    if (cache.enabled) {
      read_per_sample =
          cache_read_seconds_per_sample(model, cache.boundary_layer, cfg.cache_tiers);
    } else if (l_frozen > 0) {
      // Recompute path: every sample pays the frozen prefix once per epoch.
      out.frozen_forward_per_sample +=
          cfg.cost.c_fwd * static_cast<double>(model.prefix_params(l_frozen));
    }

    if (elastic && plan_changed) {
      const ChunkProfile profile = optimal_chunks(
          plan, model, seq, cfg.training.per_pipeline_batch, r, cfg.cluster,
          cfg.cost, cache.enabled, read_per_sample);
      micro_batches = profile.chosen;
    }

    if (cfg.features.autodp) {
      // Exercised every epoch so the shards stay reproducible and node-stable.
      (void)redistribute(static_cast<std::int64_t>(dataset), topo, epoch, cfg.seed);
    }

    IterationSchedule iter;
    double iteration_time = 0.0;
    if (elastic) {
      iter = schedule_iteration(plan, model, seq, micro_batches,
                                cfg.training.per_pipeline_batch, r, cfg.cluster,
                                cfg.cost, cache.enabled, read_per_sample);
      iteration_time = iter.makespan;
    } else {
      iter = base.iteration;
      iteration_time = iter.makespan;
      if (cfg.features.freeze && l_frozen > 0)
        iteration_time *= 1.0 + cfg.freeze_only_slowdown;
    }

    const double iters = dataset / (cfg.training.per_pipeline_batch * r);

    // Hierarchical tier traffic for the cached activations; the per-node
    // daemon's budget is split across the node's replicas.
    if (cache.enabled) {
      const double bytes_per_batch =
          static_cast<double>(model.boundary_bytes(2 * cache.boundary_layer)) *
          cfg.training.per_pipeline_batch;
      CacheTierParams shard_tiers = cfg.cache_tiers;
      shard_tiers.host_capacity_bytes =
          cfg.cache_tiers.host_capacity_bytes /
          std::max(1, r / cfg.cluster.node_count);
      const int batches = std::max(1, static_cast<int>(std::llround(iters)));
      if (shard_tiers.host_capacity_bytes >= shard_tiers.block_batches * bytes_per_batch) {
        CacheTierSim tier(shard_tiers, bytes_per_batch, batches);
        double now = 0.0;
        for (int b = 0; b < batches; ++b) {
          const WindowStep step = tier.advance(b, now);
          now += iteration_time + step.stall_seconds;
          for (const TierAction& a : step.actions) {
            const char* name = a.kind == TierAction::Kind::kPrefetch ? "prefetch"
                               : a.kind == TierAction::Kind::kEvict  ? "evict"
                                                                     : "stall";
            if (out.cache_events.size() < 4096)
              out.cache_events.push_back({epoch, name, a.bytes, a.duration});
          }
        }
        row.stall_time = tier.total_stall();
      } else {
        log_info("epoch %d: host tier cannot hold one block; charging disk reads",
                 epoch);
        row.stall_time = bytes_per_batch * batches / shard_tiers.disk_bandwidth;
      }
    }

    row.l_frozen = l_frozen;
    row.pipeline_length = elastic ? k : k0;
    row.replica_width = r;
    row.micro_batches = micro_batches;
    row.iteration_time = iteration_time;
    row.throughput = cfg.training.per_pipeline_batch * r / iteration_time;
    row.bubble_time = iter.total_bubble;
    row.comm_time = iter.allreduce_seconds * iters;
    row.exposed_comm_time = iter.exposed_comm * iters;
    row.cache_enabled = cache.enabled;
    row.epoch_time = iters * iteration_time + row.transition_overhead +
                     row.cache_transition_time + row.stall_time;
    append_timeline(out, iter, epoch, clock);
    clock += row.epoch_time;
    out.epochs.push_back(row);
  }

  out.total_seconds = clock;
  out.speedup = out.baseline_total_seconds / out.total_seconds;
  double comm_total = 0.0;
  for (const EpochRow& row : out.epochs) comm_total += row.comm_time;
  out.comm_ratio = comm_total / out.total_seconds;
  out.final_prefix_forward_per_sample =
      cfg.cost.c_fwd * static_cast<double>(model.prefix_params(l_frozen));
  return out;
}

std::vector<BreakdownRow> speedup_breakdown(const ScenarioConfig& cfg) {
  struct Combo {
    const char* name;
    FeatureFlags flags;
  };
  const Combo combos[] = {
      {"baseline", {false, false, false, false}},
      {"freeze", {true, false, false, false}},
      {"autopipe", {true, true, false, false}},
      {"autopipe+autocache", {true, true, false, true}},
      {"autopipe+autodp", {true, true, true, false}},
      {"all", {true, true, true, true}},
  };
  std::vector<BreakdownRow> rows;
  double baseline_total = 0.0;
  for (const Combo& combo : combos) {
    ScenarioConfig c = cfg;
    c.features = combo.flags;
    const RunResult r = simulate_run(c);
    BreakdownRow row;
    row.combo = combo.name;
    row.total_seconds = r.total_seconds;
    const double r0 = Topology(cfg.cluster, cfg.pipeline_length_at_start()).replica_width();
    const double samples = static_cast<double>(cfg.training.iterations_per_epoch) *
                           cfg.training.per_pipeline_batch * r0 * cfg.training.epochs;
    row.avg_throughput = samples / r.total_seconds;
    if (row.combo == "baseline") baseline_total = r.total_seconds;
    row.speedup_vs_baseline = baseline_total / r.total_seconds;
    rows.push_back(row);
  }
  return rows;
}

std::string report_csv(const RunResult& result) {
  std::string csv =
      "epoch,l_frozen,k,r,m,iteration_time_s,epoch_time_s,throughput_sps,"
      "bubble_time_s,comm_time_s,exposed_comm_time_s,cache_enabled,"
      "transition_overhead_s,cache_transition_time_s,stall_time_s\n";
  for (const EpochRow& r : result.epochs) {
    csv += std::to_string(r.epoch) + "," + std::to_string(r.l_frozen) + "," +
           std::to_string(r.pipeline_length) + "," + std::to_string(r.replica_width) +
           "," + std::to_string(r.micro_batches) + "," + fmt(r.iteration_time) + "," +
           fmt(r.epoch_time) + "," + fmt(r.throughput) + "," + fmt(r.bubble_time) +
           "," + fmt(r.comm_time) + "," + fmt(r.exposed_comm_time) + "," +
           (r.cache_enabled ? "1" : "0") + "," + fmt(r.transition_overhead) + "," +
           fmt(r.cache_transition_time) + "," + fmt(r.stall_time) + "\n";
  }
  return csv;
}

nlohmann::json timeline_to_json(const RunResult& result) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const TimelineEntry& e : result.timeline) {
    blocks.push_back({{"device", e.device},
                      {"kind", e.kind},
                      {"start_s", e.start},
                      {"end_s", e.end},
                      {"tag", e.tag}});
  }
  return blocks;
}

nlohmann::json summary_to_json(const ScenarioConfig& cfg, const RunResult& result) {
  nlohmann::json j;
  j["scenario"] = cfg.name;
  j["speedup_vs_baseline"] = result.speedup;
  j["total_seconds"] = result.total_seconds;
  j["baseline_total_seconds"] = result.baseline_total_seconds;
  j["comm_ratio"] = result.comm_ratio;
  nlohmann::json traj = nlohmann::json::array();
  for (const EpochRow& r : result.epochs) {
    traj.push_back({{"epoch", r.epoch},
                    {"l_frozen", r.l_frozen},
                    {"k", r.pipeline_length},
                    {"r", r.replica_width},
                    {"m", r.micro_batches}});
  }
  j["trajectory"] = traj;
  nlohmann::json events = nlohmann::json::array();
  for (const CacheEventLog& e : result.cache_events) {
    events.push_back({{"epoch", e.epoch},
                      {"event", e.event},
                      {"bytes", e.bytes},
                      {"duration", e.duration}});
  }
  j["cache_events"] = events;
  return j;
}

std::string transitions_to_jsonl(const RunResult& result) {
  std::string lines;
  for (const TransitionLog& t : result.transitions) {
    nlohmann::json msgs = nlohmann::json::array();
    for (const TransitionMessage& m : t.messages) {
      msgs.push_back({{"sender", m.sender},
                      {"receiver", m.receiver},
                      {"epoch", m.epoch},
                      {"lr_schedule_position", m.lr_schedule_position},
                      {"frozen_layers", m.frozen_layers},
                      {"new_k", m.new_pipeline_length},
                      {"gpu_span", {m.assigned_span.first, m.assigned_span.length}},
                      {"weights_version", m.weights_version}});
    }
    nlohmann::json j = {{"epoch", t.epoch},
                        {"old_K", t.old_k},
                        {"new_K", t.new_k},
                        {"activated_ranks", t.activated_ranks},
                        {"messages", msgs}};
    lines += j.dump() + "\n";
  }
  return lines;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << contents;
    if (!out.good()) throw IoError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace eps
