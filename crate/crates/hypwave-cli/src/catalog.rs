use std::fmt::Write;

pub struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
}

pub struct Entry {
    pub name: &'static str,
    pub summary: &'static str,
    pub required: &'static [&'static str],
    pub optional: &'static [&'static str],
    pub tables: &'static [Table],
    pub anchors: &'static [&'static str],
}

impl Entry {
    pub fn table(&self, name: &str) -> &Table {
        self.tables.iter().find(|t| t.name == name).unwrap_or_else(|| panic!("{} has no table {name}", self.name))
    }
}

const SURFACE_KEYS: &str = "surface: \"sphere\" | \"ellipse\" | \"quartic\" | \"blend\" | \"lobed\", or an object with `name` plus dim, radius, a, w, eps, lobes";

pub static CATALOG: &[Entry] = &[
    Entry {
        name: "models-decay",
        summary: "Energy and L2 norm of a model equation along a time grid, evolved by Fourier multipliers. model: free-wave, damped-wave, klein-gordon, heat, scale-invariant-dissipation (mu), scale-invariant-mass (kappa), weak-dissipation (mu, b = mu/(1+t)), variable-speed (amplitude, a = 1 + amplitude sin t).",
        required: &["model", "dim"],
        optional: &["mu", "kappa", "amplitude", "t_max", "n_times", "xi_min", "xi_max", "n_xi", "u0", "u1"],
        tables: &[Table { name: "energy", columns: &["t", "energy", "l2_norm"] }],
        anchors: &["Matsumura-type energy decay for the damped wave equation", "energy conservation for the free wave equation"],
    },
    Entry {
        name: "scattering",
        summary: "Defect between t^mu u(t) for scale-invariant dissipation and its free-wave scattering profile, on annulus data.",
        required: &["mu"],
        optional: &["times", "xi_lo", "xi_hi", "n_xi", "xi_min"],
        tables: &[Table { name: "defect", columns: &["t", "defect"] }, Table { name: "summary", columns: &["mu", "defect_exponent"] }],
        anchors: &["scattering to a free wave for effectively weak dissipation"],
    },
    Entry {
        name: "gec",
        summary: "Running supremum of the integrated dissipative part over the hyperbolic zone. kind: l1 (b = mu/(1+t)^2) or scale-invariant (b = mu/(1+t)).",
        required: &["kind", "mu"],
        optional: &["zone_c", "t_max", "n_t", "xis"],
        tables: &[Table { name: "growth", columns: &["T", "running_sup"] }, Table { name: "summary", columns: &["sup_value", "log_slope"] }],
        anchors: &["characterization of generalised energy conservation"],
    },
    Entry {
        name: "hierarchy",
        summary: "Conjugation residual of the k-step diagonaliser at seeded random points of the certified hyperbolic zone. system: damped-wave (b = b_mu/(1+t)) or variable-speed (a = 2 + sin(log(1+t))/2).",
        required: &["system", "k"],
        optional: &["b_mu", "c0", "samples", "t_max"],
        tables: &[Table { name: "residuals", columns: &["t", "xi", "residual"] }, Table { name: "summary", columns: &["zone_c", "max_residual"] }],
        anchors: &["diagonalisation hierarchy in the hyperbolic zone", "Levinson-type asymptotic integration"],
    },
    Entry {
        name: "floquet-scan",
        summary: "Floquet exponent of the Hill equation with the periodised eps-bump coefficient over a frequency range, plus the detected instability intervals.",
        required: &["eps"],
        optional: &["xi_lo", "xi_hi", "resolution", "tol", "threshold"],
        tables: &[Table { name: "scan", columns: &["xi", "kappa"] }, Table { name: "intervals", columns: &["lo", "hi", "max_kappa", "argmax"] }],
        anchors: &["Borg's theorem on instability intervals of Hill's equation"],
    },
    Entry {
        name: "resonance-growth",
        summary: "Energy growth of resonant data for a coefficient with geometric bump intervals (ratio q, scale sigma).",
        required: &["sigma", "q", "k_max"],
        optional: &["eps", "xi_lo", "xi_hi", "resolution"],
        tables: &[
            Table { name: "growth", columns: &["k", "xi", "log_energy", "interval_gain", "lower_bound", "gap_drift"] },
            Table { name: "summary", columns: &["kappa", "xi_star", "c", "c_floored"] },
        ],
        anchors: &["resonance growth under oscillating propagation speeds"],
    },
    Entry {
        name: "diffusion",
        summary: "L2 difference between D_t^k D_x^alpha of the damped wave solution and of the heat solution with datum u0 + u1.",
        required: &["k", "alpha"],
        optional: &["dim", "times", "u0", "u1", "xi_max", "panels"],
        tables: &[
            Table { name: "rows", columns: &["t", "difference", "ref_u0", "ref_u1", "ratio"] },
            Table { name: "summary", columns: &["exponent"] },
        ],
        anchors: &["diffusion phenomenon for the damped wave equation"],
    },
    Entry {
        name: "kalman-lyapunov",
        summary: "Kalman rank of a partially dissipative 2x2 system and decay of its Lyapunov functional. system: classical or rotating (theta0).",
        required: &["system"],
        optional: &["theta0", "eps", "times", "xis", "t0", "horizon", "n_fit", "tol"],
        tables: &[
            Table { name: "kalman", columns: &["t", "rank", "min_singular_value"] },
            Table { name: "samples", columns: &["t", "xi_abs", "h_min", "h_max", "gamma_local"] },
            Table { name: "fits", columns: &["xi_abs", "gamma"] },
            Table { name: "summary", columns: &["h_min", "h_max", "gamma", "envelope_c", "violations"] },
        ],
        anchors: &["Kalman rank condition", "Lyapunov functional decay for partially dissipative systems"],
    },
    Entry {
        name: "profile-compare",
        summary: "Distance between a partially dissipative solution and its parabolic profile, normalised by (1+t)^(-1/2) log(e+t). Data (exp(-|xi|^2), 0.3|xi|). system: classical or rotating (theta0).",
        required: &["system"],
        optional: &["theta0", "t0", "times", "w_limit_time", "cutoff", "n_xi", "tol"],
        tables: &[
            Table { name: "profile", columns: &["t", "difference", "solution", "normalized"] },
            Table { name: "summary", columns: &["w2_cauchy", "t0_defect"] },
        ],
        anchors: &["diffusion profile comparison for partially dissipative systems"],
    },
    Entry {
        name: "contact-index",
        summary: "Contact orders of a level surface {tau = 1} at sampled points, with the contact index gamma and the non-convex index gamma0. Surface keys as in dispersive-fit.",
        required: &["surface"],
        optional: &["n_points", "n_directions", "radius_rel", "tol"],
        tables: &[
            Table {
                name: "points",
                columns: &["p1", "p2", "p3", "min_order", "max_order", "kappa_2", "kappa_3", "kappa_4", "kappa_5", "kappa_6", "hessian_max"],
            },
            Table { name: "summary", columns: &["gamma", "gamma0", "convex", "kappa_gamma", "kappa0_gamma0"] },
        ],
        anchors: &["contact index of a convex level surface", "non-convex asymptotic contact index"],
    },
    Entry {
        name: "dispersive-fit",
        summary: "Sup of the oscillatory integral of exp(i(x.xi + t tau(xi))) against a radial bump along stationary rays, with a bootstrap decay fit. Curves in the plane only.",
        required: &["surface"],
        optional: &["times", "amp_lo", "amp_hi", "off_ray_points", "rel_tol", "n_rays"],
        tables: &[
            Table { name: "contact", columns: &["gamma", "gamma0", "convex", "predicted_exponent"] },
            Table { name: "rows", columns: &["t", "sup_ray", "argmax_ray", "off_ray"] },
            Table { name: "fit", columns: &["exponent", "band_lo", "band_hi", "n_used"] },
        ],
        anchors: &["dispersive estimates by stationary phase", "van der Corput lemma"],
    },
    Entry {
        name: "constcoeff-amplitudes",
        summary: "Characteristic roots of a strictly hyperbolic 1D operator with given speeds, the amplitudes of the solution representation and the reconstructed solution. lower: list of {r, re, im} zero-order terms.",
        required: &["speeds", "xi"],
        optional: &["lower", "data", "times"],
        tables: &[
            Table { name: "roots", columns: &["index", "re", "im"] },
            Table { name: "amplitudes", columns: &["j", "root", "re", "im"] },
            Table { name: "solution", columns: &["t", "re", "im"] },
        ],
        anchors: &["amplitude formula for constant-coefficient hyperbolic equations"],
    },
];

pub fn find(name: &str) -> Option<&'static Entry> {
    CATALOG.iter().find(|e| e.name == name)
}

pub fn render() -> String {
    let mut out = String::new();
    for e in CATALOG {
        let _ = writeln!(out, "{}", e.name);
        let _ = writeln!(out, "  {}", e.summary);
        let _ = writeln!(out, "  required: {}", e.required.join(", "));
        let _ = writeln!(out, "  optional: {}", if e.optional.is_empty() { "none".to_string() } else { e.optional.join(", ") });
        if e.required.contains(&"surface") {
            let _ = writeln!(out, "  {SURFACE_KEYS}");
        }
        for t in e.tables {
            let _ = writeln!(out, "  csv {}_{}.csv: {}", e.name, t.name, t.columns.join(", "));
        }
        for a in e.anchors {
            let _ = writeln!(out, "  anchor: {a}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_are_complete_and_unique() {
        assert_eq!(CATALOG.len(), 12);
        for (i, e) in CATALOG.iter().enumerate() {
            assert!(!e.anchors.is_empty() && !e.required.is_empty() && !e.tables.is_empty(), "{}", e.name);
            assert!(CATALOG[..i].iter().all(|o| o.name != e.name));
            assert!(e.required.iter().all(|k| !e.optional.contains(k)));
        }
    }
}
