#pragma once

#include "gne/game.hpp"

#include <json.hpp>

#include <string>

namespace gne {

using Json = nlohmann::json;

/// Builds and finalizes a GameSpec from the JSON game document.
GameSpec parse_game(const Json& doc, std::uint64_t seed = 0, bool strict = true);
GameSpec load_game(const std::string& path, std::uint64_t seed = 0, bool strict = true);
Json read_json(const std::string& path);

Vec json_vector(const Json& v, const char* what);
Mat json_matrix(const Json& v, Index rows, Index cols, const char* what);
SpMat json_sparse(const Json& v, Index rows, Index cols, const char* what);
Json vector_json(const Vec& v);

/// Selection block of the game document, given the joint layout.
SelectionFunction parse_selection(const Json& doc, const Layout& layout);

}  // namespace gne
