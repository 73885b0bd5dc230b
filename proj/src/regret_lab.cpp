#include "cascade/regret_lab.hpp"

#include <numeric>
#include <ostream>

#include "cascade/format.hpp"

namespace cascade::regret {

int optimal_deferral_rule(double mu, double c_next, double epsilon_i)
{
    require(mu >= 0.0 && c_next >= 0.0 && epsilon_i >= 0.0, "deferral rule inputs must be nonnegative");
    return mu * c_next - epsilon_i > 0.0 ? 0 : 1;
}

double trailing_loss_estimate(std::span<const double> losses, std::size_t window)
{
    require(!losses.empty() && window >= 1, "loss estimate needs at least one loss and a positive window");
    const std::size_t n = std::min(window, losses.size());
    const auto tail = losses.subspan(losses.size() - n);
    return std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(n);
}

double constant_gate_cost(std::span<const EpisodeCostInputs> episodes, const CostModel& cost, std::uint64_t mask)
{
    const std::size_t inner = cost.levels() - 1;
    require(inner < 63 && mask < (std::uint64_t{1} << inner), "gate mask out of range");
    double total = 0.0;
    for (const auto& e : episodes) {
        EpisodeCostInputs gated = e;
        for (std::size_t i = 0; i < inner; ++i) gated.defer_probs.at(i) = ((mask >> i) & 1U) ? 1.0 : 0.0;
        total += episode_cost(gated, cost);
    }
    return total;
}

CascadeGateResult hindsight_best_cascade(std::span<const EpisodeCostInputs> episodes, const CostModel& cost)
{
    const std::size_t inner = cost.levels() - 1;
    require(inner >= 1 && inner < 20, "hindsight enumeration supports 1..19 gated levels");
    CascadeGateResult best;
    best.J = std::numeric_limits<double>::infinity();
    std::uint64_t best_mask = 0;
    const std::uint64_t count = std::uint64_t{1} << inner;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        const double J = constant_gate_cost(episodes, cost, mask);
        best.all_J.push_back(J);
        if (J < best.J) {
            best.J = J;
            best_mask = mask;
        }
    }
    for (std::size_t i = 0; i < inner; ++i) best.always_defer.push_back(((best_mask >> i) & 1U) != 0);
    return best;
}

double cost_equilibrium(double llm_cost_C, double handled_fraction_x)
{
    if (!(handled_fraction_x >= 0.0 && handled_fraction_x < 1.0))
        throw DomainError("handled fraction x must be in [0,1)");
    if (!(llm_cost_C > 0.0)) throw DomainError("LLM cost C must be positive");
    return handled_fraction_x * llm_cost_C / (3.0 - 2.0 * handled_fraction_x);
}

void write_regret_csv(std::ostream& out, std::span<const RegretCheckpoint<double>> rows)
{
    out << "T,measured_regret,bound,avg_regret\n";
    for (const auto& r : rows)
        out << r.T << ',' << format_double(r.measured_regret) << ',' << format_double(r.bound) << ','
            << format_double(r.avg_regret) << '\n';
}

} // namespace cascade::regret
