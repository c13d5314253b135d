#pragma once

#include "gne/hsdm.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gne {

enum class Phase { Exchange1, Local1, Exchange2, Local2, Coord, Hsdm };
const char* to_string(Phase phase);

/// One typed block message. Empty vectors mean "not carried".
struct Payload {
  Vec x;
  Vec lambda;
  Vec nu;
  bool has_x = false;
  bool has_lambda = false;
  bool has_nu = false;

  Index bytes() const;
  Index blocks() const { return Index(has_x) + Index(has_lambda) + Index(has_nu); }
};

/// Inbound queues of one round, keyed by (receiver, sender).
class Mailbox {
 public:
  explicit Mailbox(Index agents) : inbox_(static_cast<size_t>(agents)) {}

  void clear();
  /// Merges into any payload already queued from the same sender.
  void post(Index from, Index to, const Payload& p);
  /// Throws LocalityViolation when nothing from `from` is queued for `to`.
  const Payload& receive(Index to, Index from) const;
  bool has(Index to, Index from) const;

 private:
  std::vector<std::map<Index, Payload>> inbox_;
};

/// Semi-central node computing ∇φ from gathered blocks.
class Coordinator {
 public:
  Coordinator(const SelectionFunction& phi, const Layout& layout) : phi_(&phi), layout_(layout) {}

  /// Gathers all local blocks, returns the per-agent gradient blocks.
  std::vector<Vec> gradients(const std::vector<Vec>& locals) const;
  Index invocations() const { return calls_; }

 private:
  const SelectionFunction* phi_;
  Layout layout_;
  mutable Index calls_ = 0;
};

struct IterationStats {
  std::map<Phase, Index> messages;
  std::map<Phase, Index> bytes;
  Index full_rounds = 0;  // exchanges carrying x or λ
  Index aux_rounds = 0;   // ν-only exchanges
  Index coordinator_messages = 0;

  Index total_messages() const;
  Index exchange_messages() const;
};

struct NetOptions {
  /// Agents of a local phase run in a random order drawn from this seed.
  std::optional<std::uint64_t> shuffle_seed;
  bool concurrent = false;
  std::ostream* log = nullptr;  // JSON lines {round, phase, from, to, bytes}
};

/// Per-agent FBF and pFB programs driven phase by phase.
class AgentNetwork {
 public:
  AgentNetwork(const GameSpec& game, StepSizes steps, NetOptions opts = {});

  void set_state(const Vec& w);
  Vec state() const;
  const Vec& local(Index i) const { return local_[static_cast<size_t>(i)]; }

  /// One outer iteration: exchange, local update(s), coordinator, HSDM step.
  void iterate(const SelectionFunction& phi, double beta);
  /// T(ω) only (no coordinator, no gradient step).
  void apply_operator();

  const IterationStats& last_stats() const { return stats_; }
  Index rounds() const { return round_; }
  SplitMode mode() const { return steps_.mode; }

 private:
  const GameSpec* game_;
  StepSizes steps_;
  NetOptions opts_;
  std::vector<Vec> local_;  // (x_i, λ_i, ν_i)
  Mailbox box_;
  IterationStats stats_;
  Index round_ = 0;

  std::vector<Index> order();
  void run_local(const std::function<void(Index)>& body);
  void send(Phase phase, Index from, Index to, const Payload& p);
  void exchange(Phase phase, const std::vector<Vec>& src, bool x, bool lambda, bool nu);
  void fbf_round();
  void pfb_round();
  void gradient_step(const SelectionFunction& phi, double beta);
};

/// Σ_i(|N_i^J| + 2|N_i^λ|) doubled for FBF, single for pFB, plus 2N for a non-separable φ.
Index expected_messages(const GameSpec& game, SplitMode mode, bool separable);

/// max_k ‖ω_net^(k) − ω_mono^(k)‖ over `iters` HSDM iterations.
double equivalence_check(const GameSpec& game, const StepSizes& steps, const SelectionFunction& phi,
                         const BetaSchedule& schedule, const Vec& w0, Index iters,
                         NetOptions opts = {});

}  // namespace gne
