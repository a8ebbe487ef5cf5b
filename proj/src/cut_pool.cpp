#include <cmath>

#include "wdro/sip.hpp"

namespace wdro {

CutPool::CutPool(double resolution) : resolution_(resolution) {
    if (!(resolution > 0.0)) throw Error("cut pool resolution must be positive");
}

CutPool::Key CutPool::key_of(const Scenario& s) const {
    Key key{s.sample_index, {}};
    key.second.reserve(s.point.size());
    for (double c : s.point) key.second.push_back(std::nearbyint(c / resolution_));
    return key;
}

bool CutPool::add(Scenario scenario, int birth_iteration, double w_at_birth) {
    if (!keys_.insert(key_of(scenario)).second) return false;
    cuts_.push_back({std::move(scenario), birth_iteration, w_at_birth});
    return true;
}

bool CutPool::contains(const Scenario& scenario) const { return keys_.count(key_of(scenario)) > 0; }

std::vector<Scenario> CutPool::scenarios() const {
    std::vector<Scenario> out;
    out.reserve(cuts_.size());
    for (const Cut& c : cuts_) out.push_back(c.scenario);
    return out;
}

std::size_t CutPool::remove_if(const std::function<bool(const Cut&)>& drop) {
    std::vector<Cut> kept;
    kept.reserve(cuts_.size());
    std::size_t removed = 0;
    for (Cut& c : cuts_) {
        if (drop(c)) {
            keys_.erase(key_of(c.scenario));
            ++removed;
        } else {
            kept.push_back(std::move(c));
        }
    }
    cuts_ = std::move(kept);
    return removed;
}

}  // namespace wdro
