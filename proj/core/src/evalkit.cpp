#include "halotouch/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace halotouch::evalkit {

MatchReport match_events(const std::vector<double>& detected_ms,
                         const std::vector<double>& truth_ms, double window_ms) {
    MatchReport r;
    r.pairing_window_ms = window_ms;

    // Greedy nearest-in-time one-to-one pairing within the window.
    struct Cand {
        double dt;
        size_t d, t;
    };
    std::vector<Cand> cands;
    for (size_t d = 0; d < detected_ms.size(); ++d)
        for (size_t t = 0; t < truth_ms.size(); ++t) {
            const double dt = std::abs(detected_ms[d] - truth_ms[t]);
            if (dt <= window_ms) cands.push_back({dt, d, t});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dt != b.dt) return a.dt < b.dt;
        if (a.t != b.t) return a.t < b.t;
        return a.d < b.d;
    });
    std::vector<bool> d_used(detected_ms.size()), t_used(truth_ms.size());
    for (const auto& c : cands) {
        if (d_used[c.d] || t_used[c.t]) continue;
        d_used[c.d] = t_used[c.t] = true;
        ++r.true_positives;
    }
    r.false_positives = int(detected_ms.size()) - r.true_positives;
    r.false_negatives = int(truth_ms.size()) - r.true_positives;

    const int tp_fp = r.true_positives + r.false_positives;
    const int tp_fn = r.true_positives + r.false_negatives;
    r.precision = tp_fp > 0 ? double(r.true_positives) / tp_fp : 0.0;
    r.recall = tp_fn > 0 ? double(r.true_positives) / tp_fn : 0.0;
    r.f1 = (r.precision + r.recall) > 0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

SpatialReport spatial_accuracy(const std::vector<std::pair<Point2, Point2>>& pairs) {
    if (pairs.size() < 2)
        throw EvalError("spatial_accuracy: need at least 2 pairs");

    SpatialReport r;
    for (const auto& [det, tgt] : pairs) {
        r.global_offset.x += det.x - tgt.x;
        r.global_offset.y += det.y - tgt.y;
    }
    r.global_offset.x /= double(pairs.size());
    r.global_offset.y /= double(pairs.size());

    std::vector<Point2> residual(pairs.size());
    std::vector<double> dist(pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
        residual[i] = {pairs[i].first.x - r.global_offset.x - pairs[i].second.x,
                       pairs[i].first.y - r.global_offset.y - pairs[i].second.y};
        dist[i] = std::hypot(residual[i].x, residual[i].y);
    }
    double mean = 0.0;
    for (double d : dist) mean += d;
    mean /= double(dist.size());
    double var = 0.0;
    for (double d : dist) var += (d - mean) * (d - mean);
    const double sd_all = std::sqrt(var / double(dist.size()));

    std::vector<size_t> kept;
    for (size_t i = 0; i < dist.size(); ++i) {
        if (dist[i] > mean + 3.0 * sd_all) ++r.outliers_removed;
        else kept.push_back(i);
    }
    double mean_kept = 0.0;
    for (size_t i : kept) mean_kept += dist[i];
    mean_kept /= double(kept.size());
    double var_kept = 0.0;
    for (size_t i : kept) var_kept += (dist[i] - mean_kept) * (dist[i] - mean_kept);
    r.mean_euclidean_error = mean_kept;
    r.sd = std::sqrt(var_kept / double(kept.size()));

    // Per-target 95% covariance ellipses, chi-square 2-dof scaling.
    constexpr double kChi2 = 5.991464547107979;
    std::map<std::pair<double, double>, std::vector<size_t>> by_target;
    for (size_t i : kept)
        by_target[{pairs[i].second.x, pairs[i].second.y}].push_back(i);
    for (const auto& [tgt, idx] : by_target) {
        if (idx.size() < 2) continue;
        double mx = 0, my = 0;
        for (size_t i : idx) { mx += residual[i].x; my += residual[i].y; }
        mx /= double(idx.size());
        my /= double(idx.size());
        double sxx = 0, syy = 0, sxy = 0;
        for (size_t i : idx) {
            const double dx = residual[i].x - mx, dy = residual[i].y - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        const double n1 = double(idx.size() - 1);
        sxx /= n1; syy /= n1; sxy /= n1;
        const double tr = sxx + syy;
        const double det = sxx * syy - sxy * sxy;
        const double disc = std::sqrt(std::max(tr * tr / 4.0 - det, 0.0));
        const double l1 = tr / 2.0 + disc, l2 = tr / 2.0 - disc;
        Ellipse95 e;
        e.center = {tgt.first + mx, tgt.second + my};
        e.semi_major = std::sqrt(kChi2 * std::max(l1, 0.0));
        e.semi_minor = std::sqrt(kChi2 * std::max(l2, 0.0));
        e.angle_deg = 0.5 * std::atan2(2.0 * sxy, sxx - syy) * 180.0 / std::numbers::pi;
        r.ellipses.push_back(e);
    }
    return r;
}

double touch_point_threshold(const std::vector<double>& truth_hover_mm,
                             const std::vector<bool>& truth_contact,
                             const std::vector<uint32_t>& key_frames) {
    if (key_frames.empty()) throw EvalError("touch_point_threshold: no key events");
    if (truth_hover_mm.size() != truth_contact.size())
        throw EvalError("touch_point_threshold: trace length mismatch");

    // Contact intervals in trace order.
    std::vector<std::pair<size_t, size_t>> contacts;  // [begin, end)
    for (size_t i = 0; i < truth_contact.size(); ++i) {
        if (truth_contact[i] && (i == 0 || !truth_contact[i - 1]))
            contacts.push_back({i, i + 1});
        else if (truth_contact[i])
            contacts.back().second = i + 1;
    }
    if (contacts.empty()) throw EvalError("touch_point_threshold: no contacts in trace");

    // One travel measurement per key event after the first: the highest
    // hover reached between consecutive contacts. The initial approach has
    // no preceding key, so it carries no lift height.
    const size_t n = std::min(key_frames.size(), contacts.size());
    if (n < 2)
        throw EvalError("touch_point_threshold: need at least 2 keyed contacts");
    double sum = 0.0;
    for (size_t k = 1; k < n; ++k) {
        double peak = 0.0;
        for (size_t i = contacts[k - 1].second; i < contacts[k].first; ++i)
            peak = std::max(peak, truth_hover_mm[i]);
        sum += peak;
    }
    return sum / double(n - 1);
}

MaeReport hover_pressure_mae(const std::vector<double>& predicted,
                             const std::vector<double>& truth_targets) {
    if (predicted.size() != truth_targets.size())
        throw EvalError("hover_pressure_mae: length mismatch");
    if (predicted.empty()) throw EvalError("hover_pressure_mae: empty series");
    MaeReport r;
    std::map<double, std::pair<double, int>> acc;
    for (size_t i = 0; i < predicted.size(); ++i) {
        const double e = std::abs(predicted[i] - truth_targets[i]);
        r.mae += e;
        auto& [s, c] = acc[truth_targets[i]];
        s += e;
        ++c;
    }
    r.mae /= double(predicted.size());
    for (const auto& [target, sc] : acc)
        r.per_target[target] = sc.first / sc.second;
    return r;
}

namespace {

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> words;
    std::stringstream ss(s);
    std::string w;
    while (ss >> w) words.push_back(w);
    return words;
}

}  // namespace

TypingReport typing_metrics(const std::vector<SentenceLog>& sentences) {
    if (sentences.empty()) throw EvalError("typing_metrics: empty input");

    TypingReport rep;
    double wpm_sum = 0.0;
    long correct_chars = 0, compared_chars = 0;
    long uncorrected = 0, corrected = 0, total_chars = 0;

    for (const auto& s : sentences) {
        SentenceRow row;
        if (s.keystrokes.size() >= 2) {
            const double minutes =
                (s.keystrokes.back().t_ms - s.keystrokes.front().t_ms) / 60000.0;
            if (minutes > 0)
                row.wpm = (double(s.input.size()) / 5.0) / minutes;
        }

        // Word-aligned character comparison; length mismatches count as
        // mismatched characters.
        const auto ref_words = split_words(s.reference);
        const auto in_words = split_words(s.input);
        long ok = 0, cmp = 0;
        const size_t n_words = std::max(ref_words.size(), in_words.size());
        for (size_t w = 0; w < n_words; ++w) {
            const std::string rw = w < ref_words.size() ? ref_words[w] : "";
            const std::string iw = w < in_words.size() ? in_words[w] : "";
            const size_t len = std::max(rw.size(), iw.size());
            for (size_t c = 0; c < len; ++c)
                if (c < rw.size() && c < iw.size() && rw[c] == iw[c]) ++ok;
            cmp += long(len);
        }
        row.accuracy = cmp > 0 ? double(ok) / double(cmp) : 1.0;
        row.total_chars = int(s.reference.size());
        row.uncorrected_errors = int(cmp - ok);
        for (const auto& k : s.keystrokes)
            if (k.key == "DEL") ++row.corrected_errors;

        wpm_sum += row.wpm;
        correct_chars += ok;
        compared_chars += cmp;
        uncorrected += row.uncorrected_errors;
        corrected += row.corrected_errors;
        total_chars += row.total_chars;
        rep.per_sentence.push_back(row);
    }

    rep.wpm = wpm_sum / double(sentences.size());
    rep.accuracy = compared_chars > 0
                       ? double(correct_chars) / double(compared_chars)
                       : 1.0;
    rep.awpm = rep.wpm * rep.accuracy;
    rep.uer = total_chars > 0 ? double(uncorrected) / double(total_chars) : 0.0;
    rep.cer = total_chars > 0 ? double(corrected) / double(total_chars) : 0.0;
    return rep;
}

std::vector<PropertyResult> characterization_report(
    const std::vector<mpisim::CharacterizationRow>& rows) {
    if (rows.empty()) throw EvalError("characterization_report: empty table");
    for (const auto& r : rows) {
        if ((r.param != "yaw_deg" && r.param != "pitch_deg" && r.param != "z_m") ||
            (r.state != "hover" && r.state != "subtle" && r.state != "touch" &&
             r.state != "pressure"))
            throw EvalError("characterization_report: schema violation in row " +
                            r.param + "/" + r.state);
    }

    auto select = [&](const std::string& param, const std::string& state) {
        std::vector<std::pair<double, double>> v;
        for (const auto& r : rows)
            if (r.param == param && r.state == state)
                v.push_back({r.value, r.strength_norm});
        std::sort(v.begin(), v.end());
        return v;
    };

    std::vector<PropertyResult> out;
    auto check = [&](const std::string& name, bool pass, const std::string& detail) {
        out.push_back({name, pass, detail});
    };

    // Touch stays >= 75% through the full envelope of every sweep.
    {
        bool pass = true;
        std::string detail;
        for (const char* param : {"yaw_deg", "pitch_deg", "z_m"}) {
            for (const auto& [v, s] : select(param, "touch")) {
                if (s < 0.75) {
                    pass = false;
                    detail = std::string(param) + "=" + std::to_string(v) +
                             " touch=" + std::to_string(s);
                }
            }
        }
        check("touch_envelope_75", pass, detail);
    }
    // Proximity (hover state) falls below 50% beyond 80 cm / 25 deg yaw /
    // 15 deg pitch.
    {
        bool pass = true;
        std::string detail;
        auto beyond = [&](const std::string& param, double v) {
            if (param == "yaw_deg") return v > 25.0 + 1e-9;
            if (param == "pitch_deg") return std::abs(v) > 15.0 + 1e-9;
            return v > 0.8 + 1e-9;
        };
        for (const char* param : {"yaw_deg", "pitch_deg", "z_m"}) {
            for (const auto& [v, s] : select(param, "hover")) {
                if (beyond(param, v) && s >= 0.5) {
                    pass = false;
                    detail = std::string(param) + "=" + std::to_string(v) +
                             " hover=" + std::to_string(s);
                }
            }
        }
        check("proximity_below_50_beyond_envelope", pass, detail);
    }
    // Touch strength decreases with yaw.
    {
        const auto curve = select("yaw_deg", "touch");
        bool pass = !curve.empty();
        std::string detail;
        for (size_t i = 1; i < curve.size(); ++i) {
            if (curve[i].second > curve[i - 1].second + 0.01) {
                pass = false;
                detail = "increase at yaw=" + std::to_string(curve[i].first);
            }
        }
        check("yaw_touch_monotone_nonincreasing", pass, detail);
    }
    return out;
}

}  // namespace halotouch::evalkit
