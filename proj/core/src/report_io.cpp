#include "zoomctl/report_io.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace zoomctl {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string run_records_jsonl(std::span<const RunReport> reports) {
  std::string out;
  for (const auto& rep : reports) {
    for (int s = 0; s < rep.steps; ++s) {
      json rec;
      rec["trial"] = rep.trial;
      rec["s"] = s;
      json x = json::array();
      json d = json::array();
      for (int i = 0; i < rep.n; ++i) {
        x.push_back(rep.x_hist(s, i));
        d.push_back(rep.delta_hist(s, i));
      }
      rec["x"] = std::move(x);
      rec["delta"] = std::move(d);
      if (rep.symbols.size() == 1) {
        rec["q"] = rep.symbols[0][s];
      } else {
        json q = json::array();
        for (const auto& channel : rep.symbols) q.push_back(channel[s]);
        rec["q"] = std::move(q);
      }
      rec["b"] = static_cast<int>(rep.feedback[s]);
      rec["zoomed"] = rep.zoomed[s] != 0;
      out += rec.dump();
      out += '\n';
    }
  }
  return out;
}

std::string run_records_csv(std::span<const RunReport> reports) {
  std::string out = "trial,s";
  int n = 0;
  std::size_t channels = 1;
  if (!reports.empty()) {
    n = reports[0].n;
    channels = reports[0].symbols.size();
  }
  for (int i = 0; i < n; ++i) out += ",x" + std::to_string(i);
  for (int i = 0; i < n; ++i) out += ",delta" + std::to_string(i);
  if (channels == 1) {
    out += ",q";
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      out += ",q" + std::to_string(c);
    }
  }
  out += ",b,zoomed\n";
  for (const auto& rep : reports) {
    for (int s = 0; s < rep.steps; ++s) {
      out += std::to_string(rep.trial);
      out += ',';
      out += std::to_string(s);
      for (int i = 0; i < rep.n; ++i) {
        out += ',';
        out += format_double(rep.x_hist(s, i));
      }
      for (int i = 0; i < rep.n; ++i) {
        out += ',';
        out += format_double(rep.delta_hist(s, i));
      }
      for (const auto& channel : rep.symbols) {
        out += ',';
        out += std::to_string(channel[s]);
      }
      out += ',';
      out += std::to_string(static_cast<int>(rep.feedback[s]));
      out += ',';
      out += rep.zoomed[s] ? '1' : '0';
      out += '\n';
    }
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace zoomctl
