#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "imac/tensor.hpp"

namespace imac {

// One record per epoch, appended as a JSONL line. Optional fields are present
// only where they apply (eval fields on eval epochs, buffer stats in plr
// mode, horizon means in plr/random modes).
struct MetricsRecord {
    int epoch = 0;
    std::string phase;  // "wm", "rt", "agent", "bc"
    std::map<std::string, double> losses;
    std::optional<double> eval_return_train;
    std::optional<double> eval_return_test;
    std::optional<double> mean_sampled_horizon;
    std::optional<double> mean_replayed_horizon;
    std::optional<double> buffer_score_min;
    std::optional<double> buffer_score_mean;
    std::optional<double> buffer_score_max;
    std::optional<double> explore_fraction;
    double wall_time = 0.0;  // seconds since pipeline start; inherently nondeterministic

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["epoch"] = epoch;
        j["phase"] = phase;
        j["losses"] = losses;
        auto put = [&j](const char* key, const std::optional<double>& v) {
            if (v) j[key] = *v;
        };
        put("eval_return_train", eval_return_train);
        put("eval_return_test", eval_return_test);
        put("mean_sampled_horizon", mean_sampled_horizon);
        put("mean_replayed_horizon", mean_replayed_horizon);
        put("buffer_score_min", buffer_score_min);
        put("buffer_score_mean", buffer_score_mean);
        put("buffer_score_max", buffer_score_max);
        put("explore_fraction", explore_fraction);
        j["wall_time"] = wall_time;
        return j;
    }
};

class MetricsWriter {
public:
    MetricsWriter() = default;
    explicit MetricsWriter(const std::string& path) : os_(path, std::ios::trunc) {
        if (!os_) throw Error("MetricsWriter: cannot open " + path);
    }

    void write(const MetricsRecord& rec) {
        if (!os_.is_open()) return;
        os_ << rec.to_json().dump() << "\n";
        os_.flush();
    }

private:
    std::ofstream os_;
};

}  // namespace imac
