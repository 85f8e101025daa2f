#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"

#include "cavchem/shin_metiu.hpp"

namespace cavchem {

// Columnar CSV: R, V_0..V_{n-1}, mu_i_j for i <= j, alpha0. The first line is
// '# ' followed by a one-line JSON header. Values carry 17 significant digits,
// so a write/read cycle is bit exact.
void write_table_csv(const ElectronicStructureTable& table, std::ostream& os,
                     const nlohmann::json& extra = nlohmann::json::object());
ElectronicStructureTable read_table_csv(std::istream& is);

void save_table(const ElectronicStructureTable& table, const std::string& path,
                const nlohmann::json& extra = nlohmann::json::object());
ElectronicStructureTable load_table(const std::string& path);

nlohmann::json to_json(const ShinMetiuParams& p);
nlohmann::json to_json(const GridSpec& g);
ShinMetiuParams params_from_json(const nlohmann::json& j);
GridSpec grid_from_json(const nlohmann::json& j);

// Shortest decimal text that reads back to the same double.
std::string exact(double v);

}  // namespace cavchem
