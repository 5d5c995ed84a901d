#pragma once
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "autobid/audit.hpp"
#include "autobid/control.hpp"
#include "autobid/mechanism.hpp"

namespace autobid {

// Column orders of every comma-separated artifact.
inline constexpr const char* kEpisodeLogHeader = "request_id,slot,bid,price,cv_j,spend,cumulative_cpa";
inline constexpr const char* kAuditHeader =
    "report,seed,utility,delivered_cpa_or_roi,constraint_satisfied,violations";
inline constexpr const char* kFrontierHeader = "value_class,report,cpa,conversions";
inline constexpr const char* kExample1Header = "row,report,requests_won,profit,delivered_cpa,constraint_satisfied";

struct FrontierRow {
  ValueClass value_class = 0;
  double report = 0.0;
  double cpa = 0.0;
  double conversions = 0.0;
};

// The slot column holds the 1-based slot position, empty when nothing was won.
std::string format_episode_log(const std::vector<RequestLog>& log);
// `key = value` lines; `extra` is appended in the given order.
std::string format_summary(const EpisodeSummary& summary,
                           const std::vector<std::pair<std::string, std::string>>& extra = {});
std::string format_audit_rows(const AuditReport& report);
std::string format_audit_summary(const AuditReport& report);
std::string format_frontier(const std::vector<FrontierRow>& rows);
std::string format_example1(const Example1Result& result);
std::string format_example1_summary(const Example1Result& result);

// Lossless structured text for every non-custom mechanism.
std::string export_mechanism(const MechanismRecord& record);
MechanismRecord import_mechanism(const std::string& text);

// Writes text to a file, creating parent directories. Throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

} // namespace autobid
