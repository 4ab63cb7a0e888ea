#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "fedgeo/config.hpp"
#include "fedgeo/fed_sim.hpp"

namespace fedgeo {

inline constexpr const char* kRoundCsvHeader =
    "round,client_id,n_samples,divergence,zscore,local_loss,is_shifted,median,mad,probe_accuracy";

// %.17g, so values round-trip through text.
std::string format_double(double v);

void write_csv_header(std::ostream& out);
// One row per participating client.
void write_csv_rows(std::ostream& out, const RoundRecord& record);

// Every effective config value, grouped by section.
nlohmann::json config_to_json(const SimConfig& cfg);

// Fraction of rounds (with index >= first_round) in which each client had the
// highest z-score among participants. Ties go to the lowest client id.
std::vector<double> max_z_fractions(const std::vector<RoundRecord>& records, std::size_t n_clients,
                                    std::size_t first_round = 0);

nlohmann::json build_summary(const SimConfig& cfg, const ExperimentResult& result);

}  // namespace fedgeo

namespace fedgeo {

struct DivergenceStats {
  double mean = 0.0;              // mean of D_c over clients and the window
  double cross_client_std = 0.0;  // population std of per-client window means
  double pooled_cv = 0.0;         // std / mean over every (client, round) value in the window
};

// Statistics over rounds [n_rounds - window, n_rounds).
DivergenceStats divergence_stats(const std::vector<RoundRecord>& records, std::size_t window);

}  // namespace fedgeo
