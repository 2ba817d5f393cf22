#pragma once

#include "epiquota/rng.hpp"
#include "epiquota/rt.hpp"

#include <algorithm>
#include <vector>

namespace rt_oracle {

using namespace epiquota;

// Individual-level enumeration: every person gets an infection day, each
// later case v splits one unit of credit over everybody infected in the
// window [t_v - max_days, t_v] in proportion to the serial-interval weight
// (v's own day included, as in the day-level mass), and a person's expected
// secondary cases are the credit received from cases after their own day.
// Days without cases carry the last value forward.
inline std::vector<rt::RtPoint> enumerate(const std::vector<int>& person_day, int days, const rt::SerialInterval& si,
                                          int now) {
    const int m = si.max_days();
    std::vector<double> credit(person_day.size(), 0.0);
    for (std::size_t v = 0; v < person_day.size(); ++v) {
        const int tv = person_day[v];
        if (tv > now) {
            continue;
        }
        double mass = 0.0;
        for (int tk : person_day) {
            if (tk >= tv - m && tk <= tv) {
                mass += si.weight(tv - tk);
            }
        }
        if (mass <= 0.0) {
            continue;
        }
        for (std::size_t u = 0; u < person_day.size(); ++u) {
            const int tu = person_day[u];
            if (tu < tv && tv - tu <= m) {
                credit[u] += si.weight(tv - tu) / mass;
            }
        }
    }
    std::vector<rt::RtPoint> out;
    bool started = false;
    rt::RtPoint last;
    for (int t = 0; t <= now && t < days; ++t) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t u = 0; u < person_day.size(); ++u) {
            if (person_day[u] == t) {
                sum += credit[u];
                ++count;
            }
        }
        if (count == 0) {
            if (started) {
                last.day = t;
                last.imputed = true;
                out.push_back(last);
            }
            continue;
        }
        const double raw = sum / count;
        const int elapsed = now - t;
        const double f = elapsed >= m ? 1.0 : si.cdf(elapsed);
        last = {t, raw, raw * (2.0 - f), false};
        out.push_back(last);
        started = true;
    }
    return out;
}

struct Instance {
    std::vector<int> person_day;
    std::vector<double> incidence;
    int now = 0;
};

// Up to `max_persons` people over up to `max_days` days, some days empty.
inline Instance random_instance(RandomStream& rng, int max_persons = 50, int max_days = 20) {
    Instance inst;
    const int days = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_days)));
    const int persons = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_persons)));
    inst.incidence.assign(static_cast<std::size_t>(days), 0.0);
    for (int p = 0; p < persons; ++p) {
        const int d = static_cast<int>(rng.below(static_cast<std::uint64_t>(days)));
        inst.person_day.push_back(d);
        inst.incidence[static_cast<std::size_t>(d)] += 1.0;
    }
    inst.now = days - 1 - static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(days, 3))));
    return inst;
}

}  // namespace rt_oracle
