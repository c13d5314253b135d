#include "gne/agent_net.hpp"
#include "gne/game_io.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <sstream>

namespace gne {

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::Exchange1: return "exchange1";
    case Phase::Local1: return "local1";
    case Phase::Exchange2: return "exchange2";
    case Phase::Local2: return "local2";
    case Phase::Coord: return "coord";
    case Phase::Hsdm: return "hsdm";
  }
  return "?";
}

Index Payload::bytes() const {
  return static_cast<Index>(sizeof(double)) *
         ((has_x ? x.size() : 0) + (has_lambda ? lambda.size() : 0) + (has_nu ? nu.size() : 0));
}

void Mailbox::clear() {
  for (auto& q : inbox_) q.clear();
}

void Mailbox::post(Index from, Index to, const Payload& p) {
  Payload& slot = inbox_.at(static_cast<size_t>(to))[from];
  if (p.has_x) {
    slot.x = p.x;
    slot.has_x = true;
  }
  if (p.has_lambda) {
    slot.lambda = p.lambda;
    slot.has_lambda = true;
  }
  if (p.has_nu) {
    slot.nu = p.nu;
    slot.has_nu = true;
  }
}

bool Mailbox::has(Index to, Index from) const {
  const auto& q = inbox_.at(static_cast<size_t>(to));
  return q.find(from) != q.end();
}

const Payload& Mailbox::receive(Index to, Index from) const {
  const auto& q = inbox_.at(static_cast<size_t>(to));
  auto it = q.find(from);
  if (it == q.end()) {
    std::ostringstream os;
    os << "agent " << to + 1 << " has no message from agent " << from + 1;
    throw Error(ErrorKind::LocalityViolation, os.str());
  }
  return it->second;
}

std::vector<Vec> Coordinator::gradients(const std::vector<Vec>& locals) const {
  ++calls_;
  Vec w(layout_.size());
  for (size_t i = 0; i < locals.size(); ++i) scatter_local(w, layout_, static_cast<Index>(i), locals[i]);
  const Vec g = phi_->gradient(w);
  std::vector<Vec> out(locals.size());
  for (size_t i = 0; i < locals.size(); ++i) out[i] = gather_local(g, layout_, static_cast<Index>(i));
  return out;
}

Index IterationStats::total_messages() const {
  Index s = 0;
  for (const auto& [ph, c] : messages) s += c;
  return s;
}

Index IterationStats::exchange_messages() const { return total_messages() - coordinator_messages; }

namespace {

bool contains(const std::vector<Index>& v, Index j) {
  return std::binary_search(v.begin(), v.end(), j);
}

[[noreturn]] void locality_fail(Index owner, Index j, const char* what) {
  std::ostringstream os;
  os << "agent " << owner + 1 << " read " << what << " of non-neighbor " << j + 1;
  throw Error(ErrorKind::LocalityViolation, os.str());
}

/// Own blocks from the local copy, everything else from the mailbox.
class MailboxReader final : public BlockReader {
 public:
  MailboxReader(const GameSpec& game, Index owner, const Vec& own, const Mailbox& box)
      : game_(game), owner_(owner), own_(own), box_(box) {}

  Vec x(Index j) const override {
    if (j == owner_) return own_.head(game_.layout().dim(owner_));
    if (!contains(game_.graph.cost_dependencies(owner_), j)) locality_fail(owner_, j, "x");
    const Payload& p = box_.receive(owner_, j);
    if (!p.has_x) locality_fail(owner_, j, "x");
    return p.x;
  }
  Vec lambda(Index j) const override {
    if (j == owner_) return own_.segment(game_.layout().dim(owner_), game_.m);
    if (!contains(game_.graph.neighbors(owner_), j)) locality_fail(owner_, j, "lambda");
    const Payload& p = box_.receive(owner_, j);
    if (!p.has_lambda) locality_fail(owner_, j, "lambda");
    return p.lambda;
  }
  Vec nu(Index j) const override {
    if (j == owner_) return own_.tail(game_.m);
    if (!contains(game_.graph.neighbors(owner_), j)) locality_fail(owner_, j, "nu");
    const Payload& p = box_.receive(owner_, j);
    if (!p.has_nu) locality_fail(owner_, j, "nu");
    return p.nu;
  }

 private:
  const GameSpec& game_;
  Index owner_;
  const Vec& own_;
  const Mailbox& box_;
};

}  // namespace

AgentNetwork::AgentNetwork(const GameSpec& game, StepSizes steps, NetOptions opts)
    : game_(&game), steps_(std::move(steps)), opts_(opts), local_(static_cast<size_t>(game.size())),
      box_(game.size()) {
  if (steps_.mode == SplitMode::Pfb && !game.affine()) {
    throw Error(ErrorKind::NotAffine, "pFB requires affine coupling constraints");
  }
}

void AgentNetwork::set_state(const Vec& w) {
  const Layout& layout = game_->layout();
  require_size(w, layout.size(), "joint state");
  for (Index i = 0; i < game_->size(); ++i) local_[static_cast<size_t>(i)] = gather_local(w, layout, i);
}

Vec AgentNetwork::state() const {
  const Layout& layout = game_->layout();
  Vec w(layout.size());
  for (Index i = 0; i < game_->size(); ++i) scatter_local(w, layout, i, local_[static_cast<size_t>(i)]);
  return w;
}

std::vector<Index> AgentNetwork::order() {
  std::vector<Index> ord(static_cast<size_t>(game_->size()));
  std::iota(ord.begin(), ord.end(), Index{0});
  if (opts_.shuffle_seed) {
    Rng rng(*opts_.shuffle_seed + static_cast<std::uint64_t>(round_));
    std::shuffle(ord.begin(), ord.end(), rng);
  }
  return ord;
}

void AgentNetwork::run_local(const std::function<void(Index)>& body) {
  const auto ord = order();
  if (opts_.concurrent) {
    parallel_for(static_cast<Index>(ord.size()), [&](Index k) { body(ord[static_cast<size_t>(k)]); });
  } else {
    for (Index i : ord) body(i);
  }
}

void AgentNetwork::send(Phase phase, Index from, Index to, const Payload& p) {
  if (from >= 0 && to >= 0) box_.post(from, to, p);
  stats_.messages[phase] += p.blocks();
  stats_.bytes[phase] += p.bytes();
  if (opts_.log) {
    Json line;
    line["round"] = round_;
    line["phase"] = to_string(phase);
    line["from"] = from < 0 ? Json("coordinator") : Json(from + 1);
    line["to"] = to < 0 ? Json("coordinator") : Json(to + 1);
    line["bytes"] = p.bytes();
    *opts_.log << line.dump() << '\n';
  }
}

void AgentNetwork::exchange(Phase phase, const std::vector<Vec>& src, bool x, bool lambda, bool nu) {
  ++round_;
  box_.clear();
  const Layout& layout = game_->layout();
  const Index m = game_->m;
  // x goes to agents whose cost depends on the sender; duals to dual neighbors
  for (Index i = 0; i < game_->size(); ++i) {
    const Vec& s = src[static_cast<size_t>(i)];
    const Index n = layout.dim(i);
    std::map<Index, Payload> out;
    if (x) {
      for (Index j = 0; j < game_->size(); ++j) {
        if (j != i && contains(game_->graph.cost_dependencies(j), i)) {
          out[j].x = s.head(n);
          out[j].has_x = true;
        }
      }
    }
    if (lambda || nu) {
      for (Index j : game_->graph.neighbors(i)) {
        if (lambda) {
          out[j].lambda = s.segment(n, m);
          out[j].has_lambda = true;
        }
        if (nu) {
          out[j].nu = s.tail(m);
          out[j].has_nu = true;
        }
      }
    }
    for (const auto& [j, p] : out) send(phase, i, j, p);
  }
  if (x || lambda) {
    ++stats_.full_rounds;
  } else {
    ++stats_.aux_rounds;
  }
}

void AgentNetwork::fbf_round() {
  const GameSpec& game = *game_;
  const size_t agents = local_.size();
  exchange(Phase::Exchange1, local_, true, true, true);
  std::vector<FbfStage1> s1(agents);
  run_local([&](Index i) {
    MailboxReader r(game, i, local_[static_cast<size_t>(i)], box_);
    s1[static_cast<size_t>(i)] = fbf_stage1(game, steps_, i, r);
  });
  std::vector<Vec> tilde(agents);
  for (size_t i = 0; i < agents; ++i) tilde[i] = s1[i].tilde;
  exchange(Phase::Exchange2, tilde, true, true, true);
  std::vector<Vec> next(agents);
  run_local([&](Index i) {
    MailboxReader r(game, i, tilde[static_cast<size_t>(i)], box_);
    next[static_cast<size_t>(i)] = fbf_stage2(game, steps_, i, r, s1[static_cast<size_t>(i)]);
  });
  local_ = std::move(next);
}

void AgentNetwork::pfb_round() {
  const GameSpec& game = *game_;
  const Layout& layout = game.layout();
  const size_t agents = local_.size();
  exchange(Phase::Exchange1, local_, true, true, false);
  std::vector<PfbStage1> s1(agents);
  run_local([&](Index i) {
    MailboxReader r(game, i, local_[static_cast<size_t>(i)], box_);
    s1[static_cast<size_t>(i)] = pfb_stage1(game, steps_, i, r);
  });
  std::vector<Vec> refl(agents);
  for (size_t i = 0; i < agents; ++i) {
    refl[i] = Vec::Zero(layout.local_size(static_cast<Index>(i)));
    refl[i].tail(game.m) = s1[i].nu_reflect;
  }
  exchange(Phase::Exchange2, refl, false, false, true);
  std::vector<Vec> next(agents);
  Mailbox none(game.size());
  run_local([&](Index i) {
    const size_t k = static_cast<size_t>(i);
    MailboxReader at_w(game, i, local_[k], none);
    MailboxReader at_r(game, i, refl[k], box_);
    next[k] = pfb_stage2(game, steps_, i, at_w, at_r, s1[k]);
  });
  local_ = std::move(next);
}

void AgentNetwork::gradient_step(const SelectionFunction& phi, double beta) {
  if (beta == 0.0) return;
  const size_t agents = local_.size();
  std::vector<Vec> grads(agents);
  if (phi.separable()) {
    run_local([&](Index i) {
      grads[static_cast<size_t>(i)] = phi.local_gradient(i, local_[static_cast<size_t>(i)]);
    });
  } else {
    ++round_;
    Coordinator coord(phi, game_->layout());
    for (size_t i = 0; i < agents; ++i) {
      Payload p;
      p.x = local_[i];
      p.has_x = true;
      send(Phase::Coord, static_cast<Index>(i), -1, p);
    }
    grads = coord.gradients(local_);
    for (size_t i = 0; i < agents; ++i) {
      Payload p;
      p.x = grads[i];
      p.has_x = true;
      send(Phase::Coord, -1, static_cast<Index>(i), p);
    }
    stats_.coordinator_messages += static_cast<Index>(2 * agents);
  }
  run_local([&](Index i) {
    const size_t k = static_cast<size_t>(i);
    local_[k] = local_[k] - beta * grads[k];
  });
}

void AgentNetwork::apply_operator() {
  stats_ = IterationStats{};
  if (steps_.mode == SplitMode::Pfb) {
    pfb_round();
  } else {
    fbf_round();
  }
}

void AgentNetwork::iterate(const SelectionFunction& phi, double beta) {
  apply_operator();
  gradient_step(phi, beta);
}

Index expected_messages(const GameSpec& game, SplitMode mode, bool separable) {
  Index xj = 0, nl = 0;
  for (Index i = 0; i < game.size(); ++i) {
    xj += static_cast<Index>(game.graph.cost_dependencies(i).size());
    nl += game.graph.degree(i);
  }
  const Index coord = separable ? 0 : 2 * game.size();
  if (mode == SplitMode::Pfb) return (xj + nl) + nl + coord;
  return 2 * (xj + 2 * nl) + coord;
}

double equivalence_check(const GameSpec& game, const StepSizes& steps, const SelectionFunction& phi,
                         const BetaSchedule& schedule, const Vec& w0, Index iters,
                         NetOptions opts) {
  AgentNetwork net(game, steps, opts);
  net.set_state(w0);
  Vec mono = w0;
  double worst = 0.0;
  for (Index k = 1; k <= iters; ++k) {
    const double beta = schedule(k);
    const Vec t = steps.mode == SplitMode::Pfb ? t_pfb(game, steps, mono) : t_fbf(game, steps, mono).out;
    mono = beta != 0.0 ? Vec(t - beta * phi.gradient(t)) : t;
    net.iterate(phi, beta);
    worst = std::max(worst, (net.state() - mono).norm());
  }
  return worst;
}

}  // namespace gne
