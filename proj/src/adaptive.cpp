#include "qestlab/adaptive.hpp"

#include <cmath>
#include <map>

namespace qestlab {

namespace {

constexpr long kPathCap = 1000000;

/// Per-path per-slot trace factors of the joint law. The joint probability
/// factorizes as prod_kappa tr(sigma_kappa) because every measurement acts on
/// a single sample; dtraces carries the same factors seeded from dstates.
struct PathFactors {
    std::vector<int> labels;
    Rvec traces;
    Rvec dtraces;
};

std::vector<PathFactors> enumerate_factors(const AdaptiveSchedule& schedule,
                                           const std::vector<Cmat>& states,
                                           const std::vector<Cmat>* dstates) {
    const int n = schedule.n_samples;
    const int rounds = schedule.rounds;
    if (static_cast<int>(states.size()) != n)
        throw DimensionMismatch("enumerate: one state per sample required");

    std::vector<PathFactors> out;
    long count = 0;

    struct Node {
        std::vector<Cmat> sigma;
        std::vector<Cmat> dsigma;
        std::vector<int> labels;
    };

    std::function<void(Node&, int, int, const std::vector<int>&)> walk =
        [&](Node& node, int r, int kappa, const std::vector<int>& round_history) {
            if (r == rounds) {
                PathFactors pf;
                pf.labels = node.labels;
                pf.traces = Rvec(n);
                pf.dtraces = Rvec::Zero(n);
                for (int s = 0; s < n; ++s) {
                    pf.traces[s] = node.sigma[s].trace().real();
                    if (dstates) pf.dtraces[s] = node.dsigma[s].trace().real();
                }
                if (++count > kPathCap) throw TreeTooLarge("enumerate: path count exceeds 1e6");
                out.push_back(std::move(pf));
                return;
            }
            const Instrument inst = schedule.choose_fn(r, kappa, round_history);
            if (inst.dim() != node.sigma[kappa].rows())
                throw DimensionMismatch("enumerate: instrument does not fit the sample");
            const int next_r = (kappa + 1 == n) ? r + 1 : r;
            const int next_k = (kappa + 1 == n) ? 0 : kappa + 1;
            for (int b = 0; b < inst.n_outcomes(); ++b) {
                Node child;
                child.sigma = node.sigma;
                child.dsigma = node.dsigma;
                child.labels = node.labels;
                child.sigma[kappa] = inst.apply_branch(b, node.sigma[kappa]);
                if (dstates) child.dsigma[kappa] = inst.apply_branch(b, node.dsigma[kappa]);
                child.labels.push_back(inst.branch(b).label);
                // History passed to choose_fn contains completed rounds only.
                std::vector<int> hist = round_history;
                if (next_r != r)
                    hist.assign(child.labels.begin(), child.labels.end());
                walk(child, next_r, next_k, hist);
            }
        };

    Node root;
    root.sigma = states;
    if (dstates) {
        if (dstates->size() != states.size())
            throw DimensionMismatch("enumerate: dstates/states size mismatch");
        root.dsigma = *dstates;
    } else {
        root.dsigma.assign(states.size(), Cmat());
    }
    std::vector<int> empty_hist;
    walk(root, 0, 0, empty_hist);
    return out;
}

double path_prob(const PathFactors& pf) {
    double p = 1.0;
    for (Eigen::Index s = 0; s < pf.traces.size(); ++s) p *= pf.traces[s];
    return p;
}

/// d/dtheta of the path probability when every slot carries the derivative
/// seed: sum over slots of (dtrace_k * prod_{k' != k} trace_k').
double path_dprob_all(const PathFactors& pf) {
    double total = 0.0;
    for (Eigen::Index s = 0; s < pf.traces.size(); ++s) {
        double term = pf.dtraces[s];
        for (Eigen::Index u = 0; u < pf.traces.size(); ++u)
            if (u != s) term *= pf.traces[u];
        total += term;
    }
    return total;
}

/// Same but only slot `kappa` is differentiated (fake-ensemble assignment).
double path_dprob_slot(const PathFactors& pf, int kappa) {
    double term = pf.dtraces[kappa];
    for (Eigen::Index u = 0; u < pf.traces.size(); ++u)
        if (u != static_cast<Eigen::Index>(kappa)) term *= pf.traces[u];
    return term;
}

std::vector<Cmat> replicate(const Cmat& m, int n) { return std::vector<Cmat>(n, m); }

} // namespace

Instrument compose_adaptive(const Instrument& first,
                            const std::function<Instrument(int)>& followup) {
    std::vector<Instrument::Branch> branches;
    int next_label = 0;
    for (int i = 0; i < first.n_outcomes(); ++i) {
        const Instrument second = followup(first.branch(i).label);
        if (second.dim() != first.dim())
            throw DimensionMismatch("compose_adaptive: followup dimension mismatch");
        for (int j = 0; j < second.n_outcomes(); ++j) {
            Instrument::Branch b;
            b.label = next_label++;
            for (const auto& k2 : second.branch(j).kraus)
                for (const auto& k1 : first.branch(i).kraus) b.kraus.push_back(k2 * k1);
            branches.push_back(std::move(b));
        }
    }
    return Instrument(std::move(branches));
}

OutcomeTree enumerate_schedule(const AdaptiveSchedule& schedule,
                               const std::vector<DensityOperator>& states) {
    std::vector<Cmat> mats;
    mats.reserve(states.size());
    for (const auto& s : states) mats.push_back(s.matrix());
    OutcomeTree tree;
    tree.n_samples = schedule.n_samples;
    tree.rounds = schedule.rounds;
    for (auto& pf : enumerate_factors(schedule, mats, nullptr))
        tree.paths.push_back({std::move(pf.labels), path_prob(pf)});
    return tree;
}

DiscreteLaw schedule_law(const ScheduleEstimator& est, const StateModel& model,
                         const Rvec& theta) {
    const int m = model.region.m;
    const Cmat rho = model.state_fn(theta).matrix();
    const auto base = enumerate_factors(est.schedule, replicate(rho, est.schedule.n_samples),
                                        nullptr);
    DiscreteLaw law;
    const int npaths = static_cast<int>(base.size());
    law.probs = Rvec(npaths);
    law.dprobs = Rmat(m, npaths);
    law.values.reserve(npaths);
    for (int p = 0; p < npaths; ++p) {
        law.probs[p] = path_prob(base[p]);
        law.values.push_back(est.value_fn(base[p].labels));
    }
    for (int i = 0; i < m; ++i) {
        const std::vector<Cmat> dstates =
            replicate(derivative(model, theta, i).matrix(), est.schedule.n_samples);
        const auto fac = enumerate_factors(est.schedule, replicate(rho, est.schedule.n_samples),
                                           &dstates);
        for (int p = 0; p < npaths; ++p) law.dprobs(i, p) = path_dprob_all(fac[p]);
    }
    return law;
}

ScheduleEstimator rebias_schedule_estimator(const ScheduleEstimator& est, const StateModel& model,
                                            const Rvec& theta0) {
    DiscreteLaw law = schedule_law(est, model, theta0);
    std::vector<Rvec> corrected = rebias_values(law, theta0);
    // Freeze the corrected table keyed by path labels.
    const auto tree = enumerate_schedule(
        est.schedule, std::vector<DensityOperator>(est.schedule.n_samples,
                                                   model.state_fn(theta0)));
    std::map<std::vector<int>, Rvec> table;
    for (std::size_t p = 0; p < tree.paths.size(); ++p) table[tree.paths[p].labels] = corrected[p];
    ScheduleEstimator out;
    out.schedule = est.schedule;
    out.value_fn = [table](const std::vector<int>& labels) {
        const auto it = table.find(labels);
        if (it == table.end()) throw InvalidConfig("rebias: unknown outcome path");
        return it->second;
    };
    return out;
}

double leibniz_check(const ScheduleEstimator& est, const StateModel& model, const Rvec& theta0,
                     int r, int kappa) {
    const int n = est.schedule.n_samples;
    const int m = model.region.m;
    const double h = 1e-4;
    const int prefix_len = r * n + kappa + 1; // z_{r-1} plus z_{r,1..kappa}

    struct Law {
        std::vector<double> probs;
        std::vector<Rvec> values;
        std::vector<int> group; // prefix id per path
    };
    std::vector<std::vector<int>> prefix_of_path;
    std::map<std::vector<int>, int> prefix_ids;

    auto law_at = [&](const Rvec& theta) {
        const Cmat rho = model.state_fn(theta).matrix();
        const auto fac = enumerate_factors(est.schedule, replicate(rho, n), nullptr);
        Law law;
        law.probs.reserve(fac.size());
        law.values.reserve(fac.size());
        for (const auto& pf : fac) {
            law.probs.push_back(path_prob(pf));
            law.values.push_back(est.value_fn(pf.labels));
            std::vector<int> prefix(pf.labels.begin(), pf.labels.begin() + prefix_len);
            auto [it, inserted] = prefix_ids.try_emplace(prefix, static_cast<int>(prefix_ids.size()));
            law.group.push_back(it->second);
        }
        return law;
    };

    // Conditional expectation table E_theta[T | prefix] for one law.
    auto cond = [&](const Law& law) {
        const int ng = static_cast<int>(prefix_ids.size());
        std::vector<double> mass(ng, 0.0);
        std::vector<Rvec> num(ng, Rvec::Zero(m));
        for (std::size_t p = 0; p < law.probs.size(); ++p) {
            mass[law.group[p]] += law.probs[p];
            num[law.group[p]] += law.probs[p] * law.values[p];
        }
        std::vector<Rvec> e(ng, Rvec::Zero(m));
        for (int gidx = 0; gidx < ng; ++gidx)
            if (mass[gidx] > 1e-14) e[gidx] = num[gidx] / mass[gidx];
        return std::pair(std::move(e), std::move(mass));
    };

    const Law law0 = law_at(theta0);
    auto [cond0, mass0] = cond(law0);

    double residual = 0.0;
    for (int i = 0; i < m; ++i) {
        Rvec tp = theta0, tm = theta0;
        tp[i] += h;
        tm[i] -= h;
        const Law lp = law_at(tp), lm = law_at(tm);

        Rvec d_total = Rvec::Zero(m); // d_i E_theta[T]
        for (std::size_t p = 0; p < lp.probs.size(); ++p)
            d_total += (lp.probs[p] - lm.probs[p]) / (2.0 * h) * lp.values[p];

        auto [ep, massp] = cond(lp);
        auto [em, massm] = cond(lm);
        const int ng = static_cast<int>(prefix_ids.size());
        // d_i E_theta E_theta0[T | prefix] (outer law varies, table frozen) and
        // d_i E_theta0 E_theta[T | prefix] (table varies, outer law frozen).
        Rvec d_outer = Rvec::Zero(m), d_inner = Rvec::Zero(m);
        for (int gidx = 0; gidx < ng; ++gidx) {
            d_outer += (massp[gidx] - massm[gidx]) / (2.0 * h) * cond0[gidx];
            d_inner += mass0[gidx] * (ep[gidx] - em[gidx]) / (2.0 * h);
        }
        residual = std::max(residual, (d_total - d_outer - d_inner).cwiseAbs().maxCoeff());
    }
    return residual;
}

FakeEnsembleReduction fake_ensemble_reduce(const ScheduleEstimator& est, const StateModel& model,
                                           const Rvec& theta0) {
    const int n = est.schedule.n_samples;
    const int rounds = est.schedule.rounds;
    const int m = model.region.m;
    const DensityOperator rho0 = model.state_fn(theta0);
    if (rho0.min_eigenvalue() <= 1e-10)
        throw StateNotPositive("fake_ensemble_reduce: rho(theta0) must be strictly positive");

    const Cmat& rho = rho0.matrix();
    const auto base = enumerate_factors(est.schedule, replicate(rho, n), nullptr);
    const int npaths = static_cast<int>(base.size());
    std::vector<double> probs(npaths);
    std::vector<Rvec> values(npaths);
    for (int p = 0; p < npaths; ++p) {
        probs[p] = path_prob(base[p]);
        values[p] = est.value_fn(base[p].labels);
    }

    // Local unbiasedness of the input at theta0.
    std::vector<std::vector<PathFactors>> dfac(m);
    for (int i = 0; i < m; ++i) {
        const std::vector<Cmat> dstates = replicate(derivative(model, theta0, i).matrix(), n);
        dfac[i] = enumerate_factors(est.schedule, replicate(rho, n), &dstates);
    }
    {
        Rvec mean = Rvec::Zero(m);
        Rmat b = Rmat::Zero(m, m);
        for (int p = 0; p < npaths; ++p) {
            mean += probs[p] * values[p];
            for (int j = 0; j < m; ++j)
                b.col(j) += path_dprob_all(dfac[j][p]) * values[p];
        }
        if ((mean - theta0).cwiseAbs().maxCoeff() > 1e-8 ||
            max_abs(b - Rmat::Identity(m, m)) > 1e-8)
            throw NotLocallyUnbiased("fake_ensemble_reduce: input must be locally unbiased");
    }

    // f_{r,kappa} = E[T | z_{r-1}, z_{r,kappa}] - E[T | z_{r-1}].
    // Tables are keyed by the conditioning labels; each path evaluates all of
    // them, giving F_kappa = sum_r f_{r,kappa} as a per-path table.
    std::vector<std::vector<Rvec>> f(rounds * n, std::vector<Rvec>(npaths, Rvec::Zero(m)));
    for (int r = 0; r < rounds; ++r)
        for (int kappa = 0; kappa < n; ++kappa) {
            std::map<std::vector<int>, std::pair<double, Rvec>> joint, prior;
            for (int p = 0; p < npaths; ++p) {
                std::vector<int> key_prior(base[p].labels.begin(),
                                           base[p].labels.begin() + r * n);
                std::vector<int> key_joint = key_prior;
                key_joint.push_back(base[p].labels[r * n + kappa]);
                auto& jt = joint.try_emplace(key_joint, 0.0, Rvec::Zero(m)).first->second;
                jt.first += probs[p];
                jt.second += probs[p] * values[p];
                auto& pr = prior.try_emplace(key_prior, 0.0, Rvec::Zero(m)).first->second;
                pr.first += probs[p];
                pr.second += probs[p] * values[p];
            }
            auto cond_of = [&](std::map<std::vector<int>, std::pair<double, Rvec>>& t,
                               const std::vector<int>& key) {
                const auto& [mass, num] = t.at(key);
                return mass > 1e-14 ? Rvec(num / mass) : Rvec(Rvec::Zero(m));
            };
            for (int p = 0; p < npaths; ++p) {
                std::vector<int> key_prior(base[p].labels.begin(),
                                           base[p].labels.begin() + r * n);
                std::vector<int> key_joint = key_prior;
                key_joint.push_back(base[p].labels[r * n + kappa]);
                f[r * n + kappa][p] = cond_of(joint, key_joint) - cond_of(prior, key_prior);
            }
        }

    FakeEnsembleReduction out;
    FakeEnsembleReport& rep = out.report;
    rep.v_input = Rmat::Zero(m, m);
    for (int p = 0; p < npaths; ++p) {
        const Rvec dev = values[p] - theta0;
        rep.v_input += probs[p] * dev * dev.transpose();
    }

    std::vector<std::vector<Rvec>> f_kappa(n, std::vector<Rvec>(npaths, Rvec::Zero(m)));
    for (int kappa = 0; kappa < n; ++kappa)
        for (int r = 0; r < rounds; ++r)
            for (int p = 0; p < npaths; ++p) f_kappa[kappa][p] += f[r * n + kappa][p];

    rep.v_reduced = Rmat::Zero(m, m);
    rep.max_f_mean = 0.0;
    for (int kappa = 0; kappa < n; ++kappa) {
        Rvec mean = Rvec::Zero(m);
        for (int p = 0; p < npaths; ++p) {
            rep.v_reduced += probs[p] * f_kappa[kappa][p] * f_kappa[kappa][p].transpose();
            mean += probs[p] * f_kappa[kappa][p];
        }
        rep.max_f_mean = std::max(rep.max_f_mean, mean.cwiseAbs().maxCoeff());
    }
    rep.psd_gap = Eigen::SelfAdjointEigenSolver<Rmat>(rep.v_input - rep.v_reduced)
                      .eigenvalues().minCoeff();

    rep.max_cross = 0.0;
    for (int a = 0; a < rounds * n; ++a)
        for (int b = a + 1; b < rounds * n; ++b) {
            Rmat cross = Rmat::Zero(m, m);
            for (int p = 0; p < npaths; ++p)
                cross += probs[p] * f[a][p] * f[b][p].transpose();
            rep.max_cross = std::max(rep.max_cross, max_abs(cross));
        }

    // B[S] under the fake-ensemble assignment: only slot kappa carries theta.
    rep.b_matrix = Rmat::Zero(m, m);
    for (int kappa = 0; kappa < n; ++kappa)
        for (int p = 0; p < npaths; ++p)
            for (int j = 0; j < m; ++j)
                rep.b_matrix.col(j) += path_dprob_slot(dfac[j][p], kappa) * f_kappa[kappa][p];

    // Single-sample POVMs: element per path, weighted by the frozen slots.
    const int d = rho0.dim();
    for (int kappa = 0; kappa < n; ++kappa) {
        std::vector<Cmat> elements;
        std::vector<Rvec> vals;
        elements.reserve(npaths);
        for (int p = 0; p < npaths; ++p) {
            // Heisenberg-picture backward pass over slot kappa's branches.
            Cmat e = Cmat::Identity(d, d);
            for (int r = rounds - 1; r >= 0; --r) {
                std::vector<int> hist(base[p].labels.begin(), base[p].labels.begin() + r * n);
                const Instrument inst = est.schedule.choose_fn(r, kappa, hist);
                const int label = base[p].labels[r * n + kappa];
                int bidx = -1;
                for (int b = 0; b < inst.n_outcomes(); ++b)
                    if (inst.branch(b).label == label) { bidx = b; break; }
                if (bidx < 0) throw InvalidConfig("fake_ensemble_reduce: label not found");
                Cmat acc = Cmat::Zero(d, d);
                for (const auto& k : inst.branch(bidx).kraus) acc += k.adjoint() * e * k;
                e = std::move(acc);
            }
            double weight = 1.0;
            for (int s = 0; s < n; ++s)
                if (s != kappa) weight *= base[p].traces[s];
            elements.push_back(weight * e);
            vals.push_back(f_kappa[kappa][p]);
        }
        out.components.push_back({Povm(std::move(elements)), std::move(vals)});
    }
    return out;
}

Estimator randomize_single_sample(const std::vector<LoComponent>& components, const Rvec& theta0,
                                  int n) {
    if (components.empty()) throw InvalidConfig("randomize_single_sample: no components");
    if (n != static_cast<int>(components.size()))
        throw InvalidConfig("randomize_single_sample: n must match the component count");
    for (const auto& c : components)
        if (static_cast<int>(c.values.size()) != c.povm.n_outcomes())
            throw DimensionMismatch("randomize_single_sample: value/POVM mismatch");
    std::vector<Cmat> elements;
    std::vector<Rvec> values;
    for (const auto& c : components)
        for (int w = 0; w < c.povm.n_outcomes(); ++w) {
            elements.push_back(c.povm.element(w) / static_cast<double>(n));
            values.push_back(static_cast<double>(n) * c.values[w] + theta0);
        }
    return Estimator(Povm(std::move(elements)), std::move(values));
}

} // namespace qestlab
