#include "autobid/io.hpp"

#include <fstream>
#include <sstream>

#include "autobid/config.hpp"
#include "autobid/error.hpp"

namespace autobid {

namespace {

std::string optional_double(const std::optional<double>& x) {
  return x ? format_double(*x) : std::string();
}

const char* flag(bool b) {
  return b ? "true" : "false";
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) {
      out += ',';
    }
    out += format_double(xs[i]);
  }
  return out;
}

std::string join(const std::map<ValueClass, double>& m) {
  std::string out;
  for (const auto& [h, x] : m) {
    if (!out.empty()) {
      out += ',';
    }
    out += std::to_string(h) + ":" + format_double(x);
  }
  return out;
}

PiecewiseLinear read_curve(const Config& config, const std::string& prefix) {
  try {
    return PiecewiseLinear(config.get_doubles(prefix + ".x"), config.get_doubles(prefix + ".y"));
  } catch (const DomainError& e) {
    throw ValidationError(prefix, e.what());
  }
}

} // namespace

std::string format_episode_log(const std::vector<RequestLog>& log) {
  std::ostringstream out;
  out << kEpisodeLogHeader << '\n';
  for (const auto& row : log) {
    out << row.request_id << ',' << (row.slot ? std::to_string(*row.slot + 1) : std::string()) << ','
        << format_double(row.bid) << ',' << format_double(row.price) << ',' << format_double(row.conversions) << ','
        << format_double(row.spend) << ',' << format_double(row.cumulative_cpa) << '\n';
  }
  return out.str();
}

std::string format_summary(const EpisodeSummary& s, const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ostringstream out;
  out << "total_conversions = " << format_double(s.total_conversions) << '\n'
      << "total_spend = " << format_double(s.total_spend) << '\n'
      << "revenue = " << format_double(s.revenue) << '\n'
      << "delivered_cpa = " << optional_double(s.delivered_cpa) << '\n'
      << "delivered_roi = " << optional_double(s.delivered_roi) << '\n'
      << "cpa_bound = " << optional_double(s.cpa_bound) << '\n'
      << "utility = " << format_double(s.utility) << '\n'
      << "constraint_satisfied = " << flag(s.constraint_satisfied) << '\n'
      << "violation_events = " << s.violation_events << '\n';
  for (const auto& [k, v] : extra) {
    out << k << " = " << v << '\n';
  }
  return out.str();
}

std::string format_audit_rows(const AuditReport& report) {
  std::ostringstream out;
  out << kAuditHeader << '\n';
  for (const auto& row : report.rows) {
    out << format_double(row.report) << ',' << row.seed << ',' << format_double(row.utility) << ','
        << optional_double(row.delivered) << ',' << flag(row.constraint_satisfied) << ',' << row.violations << '\n';
  }
  return out.str();
}

std::string format_audit_summary(const AuditReport& report) {
  std::ostringstream out;
  out << "mode = " << to_string(report.mode) << '\n'
      << "truth = " << format_double(report.truth) << '\n'
      << "reports = " << report.reports.size() << '\n'
      << "draws = " << report.draws.size() << '\n'
      << "argmax = " << format_double(report.argmax) << '\n'
      << "gap = " << format_double(report.gap) << '\n'
      << "truth_rank = " << report.truth_rank << '\n'
      << "ic = " << flag(report.ic) << '\n'
      << "ir = " << flag(report.ir) << '\n';
  for (std::size_t k = 0; k < report.draws.size(); ++k) {
    const auto& d = report.draws[k];
    const std::string p = "draw." + std::to_string(k) + ".";
    out << p << "seed = " << d.seed << '\n'
        << p << "truth_utility = " << format_double(d.truth_utility) << '\n'
        << p << "argmax = " << format_double(d.argmax) << '\n'
        << p << "gap = " << format_double(d.gap) << '\n'
        << p << "tolerance = " << format_double(d.tolerance) << '\n'
        << p << "truth_rank = " << d.truth_rank << '\n'
        << p << "ic = " << flag(d.ic) << '\n'
        << p << "ir = " << flag(d.ir) << '\n';
  }
  for (std::size_t i = 0; i < report.notes.size(); ++i) {
    out << "note." << i << " = " << report.notes[i] << '\n';
  }
  return out.str();
}

std::string format_frontier(const std::vector<FrontierRow>& rows) {
  std::ostringstream out;
  out << kFrontierHeader << '\n';
  for (const auto& r : rows) {
    out << r.value_class << ',' << format_double(r.report) << ',' << format_double(r.cpa) << ','
        << format_double(r.conversions) << '\n';
  }
  return out.str();
}

std::string format_example1(const Example1Result& result) {
  std::ostringstream out;
  out << kExample1Header << '\n';
  for (const Example1Row* row : {&result.truthful, &result.overbid}) {
    out << row->label << ',' << format_double(row->report) << ',' << row->requests_won << ','
        << format_double(row->profit) << ',' << optional_double(row->delivered_cpa) << ','
        << flag(row->constraint_satisfied) << '\n';
  }
  return out.str();
}

std::string format_example1_summary(const Example1Result& result) {
  std::ostringstream out;
  out << "value = " << format_double(result.value) << '\n'
      << "truth = " << format_double(result.truth) << '\n'
      << "truthful_profit = " << format_double(result.truthful.profit) << '\n'
      << "overbid_profit = " << format_double(result.overbid.profit) << '\n'
      << "overbid_gain = " << format_double(result.gain) << '\n'
      << "overbid_pays = " << flag(result.gain > 0.0) << '\n';
  return out.str();
}

std::string export_mechanism(const MechanismRecord& record) {
  std::ostringstream out;
  out << "kind = " << to_string(record.kind) << '\n'
      << "goal = " << (record.goal == Goal::profit ? "profit" : "revenue") << '\n'
      << "values = " << join(record.values) << '\n';
  switch (record.kind) {
  case MechanismKind::theorem1_tcpa:
    out << "curve.x = " << join(record.curve.xs()) << '\n' << "curve.y = " << join(record.curve.ys()) << '\n';
    break;
  case MechanismKind::corollary1_submarket:
    for (const auto& [h, curve] : record.submarket_curves) {
      out << "submarket." << h << ".x = " << join(curve.xs()) << '\n'
          << "submarket." << h << ".y = " << join(curve.ys()) << '\n';
    }
    break;
  case MechanismKind::theorem3_decomposed:
    out << "pricing = " << to_string(record.pricing) << '\n'
        << "weights = " << join(record.weights) << '\n'
        << "curve.x = " << join(record.curve.xs()) << '\n'
        << "curve.y = " << join(record.curve.ys()) << '\n';
    break;
  case MechanismKind::custom:
    throw InvalidMechanism("custom mechanisms cannot be exported");
  }
  return out.str();
}

MechanismRecord import_mechanism(const std::string& text) {
  const Config config = Config::parse(text);
  MechanismRecord record;
  try {
    record.kind = parse_mechanism_kind(config.get_string("kind"));
  } catch (const DomainError& e) {
    throw ValidationError("kind", e.what());
  }
  const std::string goal = config.get_string("goal");
  if (goal != "profit" && goal != "revenue") {
    throw ValidationError("goal", "must be profit or revenue");
  }
  record.goal = goal == "profit" ? Goal::profit : Goal::revenue;
  record.values = config.get_class_map("values");
  switch (record.kind) {
  case MechanismKind::theorem1_tcpa:
    record.curve = read_curve(config, "curve");
    break;
  case MechanismKind::corollary1_submarket:
    for (const auto& [h, v] : record.values) {
      record.submarket_curves.emplace(h, read_curve(config, "submarket." + std::to_string(h)));
    }
    break;
  case MechanismKind::theorem3_decomposed:
    try {
      record.pricing = parse_pricing(config.get_string("pricing"));
    } catch (const DomainError& e) {
      throw ValidationError("pricing", e.what());
    }
    record.weights = config.get_class_map("weights");
    record.curve = read_curve(config, "curve");
    break;
  case MechanismKind::custom:
    break;
  }
  return record;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << text;
  out.flush();
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

} // namespace autobid
