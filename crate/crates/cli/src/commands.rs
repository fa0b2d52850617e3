use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rowdil_core::dilation::{factor_dilation, match_minimal_dilations};
use rowdil_core::inner_functions::{multiplier_norm_truncated, non_closed_range_probe, verify_norm_equality};
use rowdil_core::invariant_subspaces::{
    generated_subspace, representation_via_dilation, wandering_defect, wandering_from_representation,
    wandering_subspace, zero_based_subspace, zero_based_subspace_augmented,
};
use rowdil_core::numerics::{isometry_defect, operator_norm, random_isometry, random_unitary, real};
use rowdil_core::{
    canonical_dilation, Error, KernelAugmentedSpace, OperatorTuple, Subspace, Tolerances, TupleAction,
};
use serde_json::{json, Value};

use crate::config::{read_subspace, ExperimentConfig, SubspaceSource, TupleSource};
use crate::Failure;

/// Slack for "nonincreasing" on purity residuals and for contractivity of normalized multipliers.
const MONOTONE_SLACK: f64 = 1e-12;
const CONTRACTIVE_SLACK: f64 = 1e-9;

/// Largest dilation depth chosen automatically.
const MAX_AUTO_N_CUT: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Dilate,
    Wandering,
    Multnorm,
    ProbeRange,
    Uniqueness,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Dilate => "dilate",
            Command::Wandering => "wandering",
            Command::Multnorm => "multnorm",
            Command::ProbeRange => "probe-range",
            Command::Uniqueness => "uniqueness",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [
            Command::Dilate,
            Command::Wandering,
            Command::Multnorm,
            Command::ProbeRange,
            Command::Uniqueness,
        ]
        .into_iter()
        .find(|c| c.name() == name)
    }

    pub fn run(self, cfg: &ExperimentConfig, tol: &Tolerances) -> Result<Outcome, Failure> {
        match self {
            Command::Dilate => dilate(cfg, tol),
            Command::Wandering => wandering(cfg, tol),
            Command::Multnorm => multnorm(cfg, tol),
            Command::ProbeRange => probe_range(cfg, tol),
            Command::Uniqueness => uniqueness(cfg, tol),
        }
    }
}

/// A flat table for the CSV output.
#[derive(Clone, Debug)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub passed: bool,
    pub results: Value,
    pub table: Table,
}

/// `max_degree` for compressed shifts; otherwise the least `m` with `||P_T^{m+1}(I)|| < residual_tol^2`,
/// since the truncation's intertwining residual is of order the square root of that tail.
fn default_n_cut(cfg: &ExperimentConfig, t: &OperatorTuple, tol: &Tolerances) -> Result<usize, Failure> {
    if let Some(TupleSource::CompressedShift) = cfg.tuple {
        return Ok(cfg.space_section()?.max_degree);
    }
    let tails = t.purity_residuals(MAX_AUTO_N_CUT + 1)?;
    Ok(tails
        .iter()
        .position(|r| *r < tol.residual_tol * tol.residual_tol)
        .unwrap_or(MAX_AUTO_N_CUT))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn dilate(cfg: &ExperimentConfig, tol: &Tolerances) -> Result<Outcome, Failure> {
    let t = cfg.tuple()?;
    let probe = cfg.probe();
    let n_cut = match probe.n_cut {
        Some(c) => c,
        None => default_n_cut(cfg, &t, tol)?,
    };
    let m_max = probe.m_max.unwrap_or(n_cut + 1);

    let (_, row_norm) = t.is_row_contraction();
    let purity = t.purity_residuals(m_max)?;
    let nonincreasing = std::iter::once(1.0)
        .chain(purity.iter().copied())
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] <= w[0] + MONOTONE_SLACK);

    let pi = canonical_dilation(&t, n_cut, tol)?;
    let defect_dim = t.defect(tol)?.defect_dim;
    let isometry = pi.isometry_defect();
    let intertwining = pi.intertwining_residual(&t)?;
    let rank = pi.minimality_rank(tol);
    let passed = isometry <= tol.residual_tol && intertwining <= tol.residual_tol && rank == defect_dim && nonincreasing;

    let rows = purity
        .iter()
        .enumerate()
        .map(|(m, r)| vec![(m + 1).to_string(), num(*r)])
        .collect();
    Ok(Outcome {
        passed,
        results: json!({
            "n": t.n(),
            "dim": t.dim(),
            "row_norm": row_norm,
            "n_cut": n_cut,
            "purity_residuals": purity,
            "purity_nonincreasing": nonincreasing,
            "defect_dim": defect_dim,
            "isometry_defect": isometry,
            "intertwining_residual": intertwining,
            "minimality_rank": rank,
        }),
        table: Table {
            headers: vec!["m", "purity_residual"],
            rows,
        },
    })
}

fn wandering(cfg: &ExperimentConfig, tol: &Tolerances) -> Result<Outcome, Failure> {
    let space = cfg.truncated_space()?;
    let n = space.n();
    let source = cfg.subspace.clone().unwrap_or(SubspaceSource::Full);
    let probe = cfg.probe();
    let n_cut = probe.n_cut.unwrap_or(space.max_degree() + 2);
    let probe_degree = probe.probe_degree.unwrap_or(2 * space.max_degree() + 2);

    // a nonzero point needs the kernel-augmented model; everything else uses the compressed shift
    let mut graded = None;
    let (model, action, s) = match &source {
        SubspaceSource::ZeroBased { a } => {
            if a.len() != n {
                return Err(Failure::config(format!("point has {} coordinates, expected {n}", a.len())));
            }
            let a: Vec<Complex64> = a.iter().map(|z| Complex64::new(z[0], z[1])).collect();
            if a.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                let action = TupleAction::full(OperatorTuple::compressed_shift(&space));
                ("compressed-shift", action, zero_based_subspace(&space, &a, tol)?)
            } else {
                // the plain truncation cannot hold S_a invariantly, but its wandering part is still informative
                let plain = zero_based_subspace(&space, &a, tol)?;
                let graded_action = TupleAction::graded_shift(&space);
                let w = wandering_subspace(&plain, &graded_action, tol)?;
                let gap = generated_subspace(&w, &graded_action, tol)?.gap(&plain)?;
                graded = Some((w.dim(), gap));
                let aug = KernelAugmentedSpace::new(*space.spec(), space.max_degree(), &a)?;
                let s = zero_based_subspace_augmented(&aug, tol)?;
                ("kernel-augmented", TupleAction::augmented_shift(&aug), s)
            }
        }
        SubspaceSource::Full => {
            let action = TupleAction::full(OperatorTuple::compressed_shift(&space));
            ("compressed-shift", action, Subspace::full(space.dim()))
        }
        SubspaceSource::File { path } => {
            let action = TupleAction::full(OperatorTuple::compressed_shift(&space));
            ("compressed-shift", action, read_subspace(path)?)
        }
    };

    let direct = wandering_subspace(&s, &action, tol)?;
    let pi = representation_via_dilation(&s, &action, n_cut, tol)?;
    let via = wandering_from_representation(&pi, tol)?;
    let gap = direct.gap(&via)?;
    let defect = wandering_defect(&direct, action.tuple(), probe_degree)?;
    let range_gap = pi.range(tol).gap(&s)?;
    let pi_defect = pi.partial_isometry_defect();
    let generated_gap = generated_subspace(&direct, &action, tol)?.gap(&s)?;

    let passed = direct.dim() == via.dim()
        && gap <= tol.residual_tol
        && defect <= tol.residual_tol
        && range_gap <= tol.residual_tol
        && pi_defect <= tol.residual_tol;

    let mut results = json!({
        "model": model,
        "ambient_dim": action.dim(),
        "subspace_dim": s.dim(),
        "wandering_dim_direct": direct.dim(),
        "wandering_dim_representation": via.dim(),
        "agreement_gap": gap,
        "wandering_defect": defect,
        "representation_fiber_dim": pi.fiber_dim(),
        "representation_range_gap": range_gap,
        "representation_partial_isometry_defect": pi_defect,
        "generated_gap": generated_gap,
        "generating": generated_gap <= tol.residual_tol,
    });
    if let Some((dim, gap)) = graded {
        results["graded_model"] = json!({ "wandering_dim": dim, "generated_gap": gap });
    }
    Ok(Outcome {
        passed,
        table: Table {
            headers: vec!["subspace_dim", "wandering_dim_direct", "wandering_dim_representation", "agreement_gap", "generated_gap"],
            rows: vec![vec![
                s.dim().to_string(),
                direct.dim().to_string(),
                via.dim().to_string(),
                num(gap),
                num(generated_gap),
            ]],
        },
        results,
    })
}

fn multnorm(cfg: &ExperimentConfig, tol: &Tolerances) -> Result<Outcome, Failure> {
    let p = cfg.polynomial()?;
    let spec = cfg.kernel_spec()?;
    let probe = cfg.probe();
    let block_max = probe.block_max.unwrap_or(12);
    let n_cut = probe.n_cut.unwrap_or(10);

    let report = verify_norm_equality(&p, &spec, block_max, tol)?;
    let normalized = p.scaled(real(1.0 / report.hk_norm));
    let truncated = (0..=n_cut)
        .map(|n| multiplier_norm_truncated(&normalized, &spec, n))
        .collect::<Result<Vec<_>, Error>>()?;
    let contractive = truncated.iter().all(|x| *x <= 1.0 + CONTRACTIVE_SLACK);
    let passed = report.pass && report.normalized_inner.is_inner && contractive;

    let rows = report
        .block_norms
        .iter()
        .enumerate()
        .map(|(b, x)| vec![b.to_string(), num(*x)])
        .collect();
    Ok(Outcome {
        passed,
        results: json!({
            "weights": report.certificate.weights,
            "weighted_degree": report.certificate.degree,
            "hk_norm": report.hk_norm,
            "block_norms": report.block_norms,
            "max_block": report.max_block,
            "norm_equality": report.pass,
            "normalized_inner": report.normalized_inner,
            "normalized_truncated_norms": truncated,
            "contractive": contractive,
        }),
        table: Table {
            headers: vec!["block", "norm"],
            rows,
        },
    })
}

fn probe_range(cfg: &ExperimentConfig, tol: &Tolerances) -> Result<Outcome, Failure> {
    let p = cfg.polynomial()?;
    let n_list = cfg.probe().n_list.unwrap_or_else(|| (2..=10).collect());
    let values = non_closed_range_probe(&p, &n_list, tol)?;
    let strictly_decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let rows = n_list
        .iter()
        .zip(&values)
        .map(|(n, v)| vec![n.to_string(), num(*v)])
        .collect();
    Ok(Outcome {
        passed: true,
        results: json!({
            "n_list": n_list,
            "smallest_nonzero_singular_values": values,
            "strictly_decreasing": strictly_decreasing,
        }),
        table: Table {
            headers: vec!["N", "smallest_nonzero_singular_value"],
            rows,
        },
    })
}

fn uniqueness(cfg: &ExperimentConfig, tol: &Tolerances) -> Result<Outcome, Failure> {
    let t = cfg.tuple()?;
    let probe = cfg.probe();
    let n_cut = match probe.n_cut {
        Some(c) => c,
        None => default_n_cut(cfg, &t, tol)?,
    };
    let trials = probe.trials.unwrap_or(20);
    let extra = probe.extra_fiber.unwrap_or(2);

    let pic = canonical_dilation(&t, n_cut, tol)?;
    let e = pic.fiber_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let mut rows = Vec::with_capacity(trials);
    let mut worst: f64 = 0.0;
    let mut per_trial = Vec::with_capacity(trials);
    for trial in 0..trials {
        let u0 = random_unitary(e, &mut rng);
        let matched = match_minimal_dilations(&pic, &pic.compose_fiber(&u0)?, tol)?;
        let u_error = operator_norm(&(&matched.map - &u0));
        let u_unitarity = isometry_defect(&matched.map);

        let v0 = random_isometry(e + extra, e, &mut rng);
        let factored = factor_dilation(&pic.compose_fiber(&v0)?, &pic, &t, tol)?;
        let v_error = operator_norm(&(&factored.map - &v0));
        let v_isometry = isometry_defect(&factored.map);

        let values = [u_error, u_unitarity, matched.residual, v_error, v_isometry, factored.residual];
        worst = values.iter().copied().fold(worst, f64::max);
        rows.push(std::iter::once(trial.to_string()).chain(values.iter().map(|x| num(*x))).collect());
        per_trial.push(json!({
            "trial": trial,
            "unitary_error": u_error,
            "unitary_defect": u_unitarity,
            "match_residual": matched.residual,
            "isometry_error": v_error,
            "isometry_defect": v_isometry,
            "factor_residual": factored.residual,
        }));
    }
    Ok(Outcome {
        passed: worst <= tol.residual_tol,
        results: json!({
            "n": t.n(),
            "dim": t.dim(),
            "n_cut": n_cut,
            "defect_dim": e,
            "extra_fiber": extra,
            "trials": per_trial,
            "worst": worst,
        }),
        table: Table {
            headers: vec![
                "trial",
                "unitary_error",
                "unitary_defect",
                "match_residual",
                "isometry_error",
                "isometry_defect",
                "factor_residual",
            ],
            rows,
        },
    })
}
