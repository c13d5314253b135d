#include "gne/game_io.hpp"

#include <fstream>
#include <sstream>

namespace gne {

namespace {

[[noreturn]] void parse_fail(const std::string& msg) { throw Error(ErrorKind::Parse, msg); }

const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) parse_fail(where + ": missing field '" + key + "'");
  return obj.at(key);
}

Vec broadcast(const Json& v, Index n, const char* what) {
  if (v.is_number()) return Vec::Constant(n, v.get<double>());
  Vec out = json_vector(v, what);
  if (out.size() != n) {
    std::ostringstream os;
    os << what << ": expected " << n << " entries, got " << out.size();
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
  return out;
}

ProxForm parse_ell(const Json& doc, Index dim) {
  if (doc.is_null()) return ProxForm::zero();
  const std::string kind = doc.value("kind", "zero");
  if (kind == "zero") return ProxForm::zero();
  if (kind == "l1") return ProxForm::l1(broadcast(field(doc, "w", "ell"), dim, "ell.w"));
  if (kind == "indicator") {
    return ProxForm::indicator(Box{broadcast(field(doc, "lo", "ell"), dim, "ell.lo"),
                                   broadcast(field(doc, "hi", "ell"), dim, "ell.hi")});
  }
  parse_fail("unknown ell kind '" + kind + "'");
}

CostForm parse_cost(const Json& doc, Index i, const std::vector<Index>& dims) {
  const Index dim = dims[static_cast<size_t>(i)];
  if (doc.is_null()) return CostForm::quadratic({}, Vec::Zero(dim));
  const std::string kind = doc.value("kind", "quadratic");
  if (kind != "quadratic") parse_fail("cost kind '" + kind + "' cannot be read from a file");
  std::vector<CostBlock> blocks;
  if (doc.contains("blocks")) {
    for (const auto& blk : doc.at("blocks")) {
      const Index j = field(blk, "agent", "cost block").get<Index>() - 1;
      if (j < 0 || j >= static_cast<Index>(dims.size())) {
        throw Error(ErrorKind::Validation, "cost block references unknown agent");
      }
      blocks.push_back({j, json_sparse(field(blk, "M", "cost block"), dim,
                                       dims[static_cast<size_t>(j)], "cost block M")});
    }
  }
  Vec c = doc.contains("c") ? broadcast(doc.at("c"), dim, "cost.c") : Vec(Vec::Zero(dim));
  return CostForm::quadratic(std::move(blocks), std::move(c));
}

ConstraintForm parse_g(const Json& doc, Index m, Index dim) {
  if (doc.is_null()) return ConstraintForm::none(m, dim);
  const std::string kind = doc.value("kind", "affine");
  Vec b = doc.contains("b") ? broadcast(doc.at("b"), m, "g.b") : Vec(Vec::Zero(m));
  if (kind == "affine") {
    return ConstraintForm::affine(json_sparse(field(doc, "A", "g"), m, dim, "g.A"), std::move(b));
  }
  if (kind == "quad") {
    SpMat a = doc.contains("a") ? json_sparse(doc.at("a"), m, dim, "g.a") : SpMat(m, dim);
    return ConstraintForm::quad(json_sparse(field(doc, "D", "g"), m, dim, "g.D"), std::move(a),
                                std::move(b));
  }
  parse_fail("unknown constraint kind '" + kind + "'");
}

LocalSet parse_set(const Json& agent, Index dim) {
  const Json& box = field(agent, "box", "agent");
  Box bx{broadcast(field(box, "lo", "box"), dim, "box.lo"),
         broadcast(field(box, "hi", "box"), dim, "box.hi")};
  if (!agent.contains("balance")) return LocalSet(std::move(bx));
  std::vector<BalanceRow> rows;
  for (const auto& r : agent.at("balance")) {
    BalanceRow row;
    for (const auto& k : field(r, "idx", "balance")) row.idx.push_back(k.get<Index>() - 1);
    row.coef = broadcast(field(r, "coef", "balance"), static_cast<Index>(row.idx.size()),
                         "balance.coef");
    row.rhs = field(r, "rhs", "balance").get<double>();
    rows.push_back(std::move(row));
  }
  return LocalSet(std::move(bx), std::move(rows));
}

// diagonal weights/reference for one part of ω
void diag_part(const Json& sel, const char* key, Index offset, Index length, Vec& w, Vec& ref,
               Index repeat_block = 0) {
  if (!sel.contains(key)) return;
  const Json& part = sel.at(key);
  auto read = [&](const char* name, Vec& dst) {
    if (!part.contains(name)) return;
    const Json& v = part.at(name);
    Vec vals;
    if (v.is_number()) {
      vals = Vec::Constant(length, v.get<double>());
    } else {
      vals = json_vector(v, name);
      if (repeat_block > 0 && vals.size() == repeat_block && length != repeat_block) {
        vals = vals.replicate(length / repeat_block, 1).eval();
      }
      if (vals.size() != length) {
        throw Error(ErrorKind::DimensionMismatch, std::string("selection.") + key + "." + name +
                                                      " has wrong length");
      }
    }
    dst.segment(offset, length) = vals;
  };
  read("weight", w);
  read("ref", ref);
}

}  // namespace

Vec json_vector(const Json& v, const char* what) {
  if (!v.is_array()) parse_fail(std::string(what) + ": expected an array of numbers");
  Vec out(static_cast<Index>(v.size()));
  for (size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) parse_fail(std::string(what) + ": expected numbers");
    out[static_cast<Index>(k)] = v[k].get<double>();
  }
  return out;
}

Mat json_matrix(const Json& v, Index rows, Index cols, const char* what) {
  if (!v.is_array()) parse_fail(std::string(what) + ": expected an array of rows");
  if (static_cast<Index>(v.size()) != rows) {
    std::ostringstream os;
    os << what << ": expected " << rows << " rows, got " << v.size();
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
  Mat out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Vec row = json_vector(v[static_cast<size_t>(r)], what);
    if (row.size() != cols) {
      std::ostringstream os;
      os << what << ": row " << r + 1 << " has " << row.size() << " entries, expected " << cols;
      throw Error(ErrorKind::DimensionMismatch, os.str());
    }
    out.row(r) = row.transpose();
  }
  return out;
}

SpMat json_sparse(const Json& v, Index rows, Index cols, const char* what) {
  return json_matrix(v, rows, cols, what).sparseView();
}

Json vector_json(const Vec& v) {
  Json out = Json::array();
  for (Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) parse_fail("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    parse_fail(path + ": " + e.what());
  }
}

SelectionFunction parse_selection(const Json& doc, const Layout& layout) {
  if (!doc.contains("selection") || doc.at("selection").is_null()) {
    return SelectionFunction::zero(layout);
  }
  const Json& sel = doc.at("selection");
  const std::string kind = sel.value("kind", "quadratic");
  if (kind != "quadratic") parse_fail("selection kind '" + kind + "' cannot be read from a file");
  const Index n = layout.size(), nm = layout.agents() * layout.coupling();
  Vec w = Vec::Zero(n), ref = Vec::Zero(n);
  diag_part(sel, "x", 0, layout.primal(), w, ref);
  diag_part(sel, "lambda", layout.primal(), nm, w, ref, layout.coupling());
  diag_part(sel, "nu", layout.primal() + nm, nm, w, ref, layout.coupling());

  std::vector<Triplet> trips;
  std::vector<double> rw, rr;
  Index row = 0;
  for (Index k = 0; k < n; ++k) {
    if (w[k] == 0.0) continue;
    trips.emplace_back(row++, k, 1.0);
    rw.push_back(w[k]);
    rr.push_back(ref[k]);
  }
  if (sel.contains("rows")) {
    for (const auto& r : sel.at("rows")) {
      for (const auto& term : field(r, "terms", "selection row")) {
        const Index k = term.at(0).get<Index>() - 1;
        if (k < 0 || k >= n) throw Error(ErrorKind::DimensionMismatch, "selection row index out of range");
        trips.emplace_back(row, k, term.at(1).get<double>());
      }
      rw.push_back(r.value("weight", 1.0));
      rr.push_back(r.value("ref", 0.0));
      ++row;
    }
  }
  SpMat q(row, n);
  q.setFromTriplets(trips.begin(), trips.end());
  auto phi = SelectionFunction::quadratic(layout, std::move(q), Eigen::Map<Vec>(rr.data(), row),
                                          Eigen::Map<Vec>(rw.data(), row));
  std::optional<double> sigma, lphi;
  if (sel.contains("sigma")) sigma = sel.at("sigma").get<double>();
  if (sel.contains("L_phi")) lphi = sel.at("L_phi").get<double>();
  phi.declare(sigma, lphi);
  return phi;
}

GameSpec parse_game(const Json& doc, std::uint64_t seed, bool strict) {
  try {
    GameSpec game;
    game.m = doc.value("m", Index{0});
    const Json& agents = field(doc, "agents", "game");
    if (!agents.is_array() || agents.empty()) parse_fail("game: 'agents' must be a non-empty array");
    std::vector<Index> dims;
    for (const auto& a : agents) dims.push_back(field(a, "dim", "agent").get<Index>());
    for (Index d : dims) {
      if (d <= 0) throw Error(ErrorKind::Validation, "agent dimension must be positive");
    }
    for (size_t i = 0; i < agents.size(); ++i) {
      const Json& a = agents[i];
      AgentSpec ag;
      ag.dim = dims[i];
      ag.cost = parse_cost(a.value("cost", Json()), static_cast<Index>(i), dims);
      ag.ell = parse_ell(a.value("ell", Json()), ag.dim);
      ag.set = parse_set(a, ag.dim);
      ag.g = parse_g(a.value("g", Json()), game.m, ag.dim);
      game.agents.push_back(std::move(ag));
    }
    std::vector<std::pair<Index, Index>> edges;
    if (doc.contains("graph")) {
      for (const auto& e : doc.at("graph").value("edges", Json::array())) {
        edges.emplace_back(e.at(0).get<Index>() - 1, e.at(1).get<Index>() - 1);
      }
    }
    game.graph = CommGraph(static_cast<Index>(dims.size()), edges);
    if (doc.contains("slater_point") && !doc.at("slater_point").is_null()) {
      game.slater_point = json_vector(doc.at("slater_point"), "slater_point");
    }
    if (doc.contains("L_F")) game.declared_lf = doc.at("L_F").get<double>();
    if (doc.contains("eta")) game.declared_eta = doc.at("eta").get<double>();
    game.selection = parse_selection(doc, Layout(dims, game.m));
    game.finalize(seed, strict);
    return game;
  } catch (const Json::exception& e) {
    parse_fail(std::string("game document: ") + e.what());
  }
}

GameSpec load_game(const std::string& path, std::uint64_t seed, bool strict) {
  return parse_game(read_json(path), seed, strict);
}

}  // namespace gne
