//! Built-in configurations, one per acceptance criterion.

use std::f64::consts::FRAC_PI_4;

use crate::config::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// The sizes the acceptance criteria call for.
    Full,
    /// Small sizes for quick runs and the reproducibility check.
    Smoke,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub title: &'static str,
    pub config: ExperimentConfig,
}

pub const AC_NAMES: [&str; 15] =
    ["AC1", "AC2", "AC3", "AC4", "AC5", "AC6", "AC7", "AC8", "AC9", "AC10", "AC11", "AC12", "AC13", "AC14", "AC15"];

fn konst(c: f64) -> DensitySpec {
    DensitySpec::Constant { c }
}

fn pow(c: f64, lambda: f64) -> DensitySpec {
    DensitySpec::PowerLaw { c, lambda }
}

fn dl(d: usize, lambda: f64) -> DimLambda {
    DimLambda { d, lambda }
}

fn cfg(name: &str, seed: u64, experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig { name: name.to_string(), seed, threads: None, output_dir: None, experiment }
}

fn pick<T>(s: Scale, full: T, smoke: T) -> T {
    match s {
        Scale::Full => full,
        Scale::Smoke => smoke,
    }
}

fn entry(name: &'static str, s: Scale) -> CatalogEntry {
    let seed = 1000 + AC_NAMES.iter().position(|n| *n == name).expect("known name") as u64;
    let (title, e) = match name {
        "AC1" => (
            "survival tail at large depth",
            Experiment::VerifyMoments(MomentCheck::SurvivalTail(SurvivalTailParams {
                d: 2,
                g: 1.0,
                density: pow(1.0, 1.0),
                ys: vec![-10.0, -100.0, -1000.0],
                t_max: 5.0,
                t_points: 100,
                u_points: pick(s, 21, 5),
            })),
        ),
        "AC2" => (
            "rescaled moment limits",
            Experiment::VerifyMoments(MomentCheck::MomentLimits(MomentLimitParams {
                d: 2,
                g: 0.5,
                densities: vec![konst(1.0), pow(1.0, 1.0)],
                ys: pick(s, vec![-1.0, -4.0], vec![-1.0]),
                u_d: 0.3,
                powers: pick(s, vec![1, 2, 3], vec![1, 2]),
                ns: pick(s, vec![1e2, 1e4, 1e6], vec![1e2, 1e4]),
            })),
        ),
        "AC3" => (
            "fluctuation asymptotics",
            Experiment::VerifyFluctuations(FluctuationParams {
                d: 2,
                g: 0.5,
                u_d: 1.0,
                densities: vec![konst(1.0), pow(1.0, 1.0)],
                y: -1.0,
                ns: pick(s, vec![1e2, 1e4, 1e6], vec![1e2, 1e4]),
                c: 1.0,
                lambdas: vec![0.0, 1.0],
                depths: pick(s, vec![10.0, 100.0, 1000.0], vec![10.0, 100.0]),
            }),
        ),
        "AC4" => (
            "hazard identities",
            Experiment::VerifyMoments(MomentCheck::Martingale(MartingaleParams {
                d: 2,
                g: 1.0,
                samples: pick(s, 100_000, 2_000),
                cases: vec![
                    MartingaleCase { density: konst(1.0), y: -1.0, u_d: 0.3 },
                    MartingaleCase { density: konst(2.0), y: -4.0, u_d: -0.5 },
                    MartingaleCase { density: pow(1.0, 1.0), y: -1.0, u_d: 0.8 },
                    MartingaleCase { density: pow(1.0, 1.0), y: -4.0, u_d: -0.7 },
                    MartingaleCase { density: pow(0.5, 2.0), y: -2.0, u_d: 0.0 },
                    MartingaleCase { density: DensitySpec::Builtin { name: "bump".into() }, y: -3.0, u_d: 0.9 },
                ],
            })),
        ),
        "AC5" => (
            "entrance from rest",
            Experiment::VerifyMoments(MomentCheck::Entrance(EntranceParams {
                d: 2,
                g: 1.0,
                c: 1.0,
                lambdas: vec![0.0, 1.0, 2.0],
                samples: pick(s, 100_000, 2_000),
            })),
        ),
        "AC6" => (
            "one-step mean and variance",
            Experiment::VerifyMoments(MomentCheck::OneStep(OneStepParams {
                g: 1.0,
                c: 1.0,
                cases: pick(s, vec![dl(2, 0.0), dl(2, 1.0), dl(3, 1.0)], vec![dl(2, 0.0)]),
                xs: vec![100.0, 1000.0],
                paths: pick(s, 100_000, 2_000),
                quadrature: s == Scale::Full,
            })),
        ),
        "AC7" => (
            "skeleton invariance, raw power law",
            Experiment::Invariance(InvarianceCheck::RawPowerLaw(RawInvarianceParams {
                g: 1.0,
                c: 1.0,
                cases: pick(s, vec![dl(1, 0.0), dl(2, 0.0), dl(2, 1.0)], vec![dl(2, 0.0)]),
                t: 1.0,
                ns: pick(s, vec![100, 1_000, 10_000], vec![10, 100]),
                paths: pick(s, 10_000, 500),
            })),
        ),
        "AC8" => (
            "rescaled invariance with cutoff",
            Experiment::Invariance(InvarianceCheck::RescaledCutoff(CutoffInvarianceParams {
                g: 1.0,
                y0: -1.0,
                v: -0.25,
                s: 0.2,
                n: pick(s, 1e4, 1e3),
                paths: pick(s, 10_000, 500),
                reference_steps: pick(s, 2_000, 200),
            })),
        ),
        "AC9" => (
            "clock convergence",
            Experiment::Clock(ClockParams {
                g: 1.0,
                density: konst(1.0),
                d: 2,
                y0: -1.0,
                v: -0.25,
                ns: pick(s, vec![1e2, 1e3, 1e4], vec![1e2, 1e3]),
                paths: pick(s, 1_000, 200),
            }),
        ),
        "AC10" => (
            "recurrence and transience",
            Experiment::Recurrence(RecurrenceParams {
                g: 1.0,
                c: 1.0,
                cases: pick(s, recurrence_cases(), smoke_recurrence_cases()),
                growth_paths: pick(s, 200, 20),
                growth_events: pick(s, 1 << 14, 1 << 8),
            }),
        ),
        "AC11" => (
            "scale function, speed measure and kappa",
            Experiment::Limits(LimitCheck::ScaleSpeed(ScaleSpeedParams {
                d: 2,
                density: konst(1.0),
                y: -4.0,
                singular: DensitySpec::Builtin { name: "inverse-near-zero".into() },
                harmonic_densities: vec![konst(1.0), pow(1.0, 1.0), DensitySpec::Builtin { name: "bump".into() }],
                dims: vec![1, 2, 3],
                grid: vec![-0.5, -1.0, -2.0, -4.0, -8.0],
            })),
        ),
        "AC12" => (
            "Bessel dimension arithmetic",
            Experiment::Limits(LimitCheck::DimensionArithmetic(DimensionParams {
                dims: vec![1, 2, 3, 4, 5, 6],
                lambdas: vec![0.0, 0.5, 1.0, 2.0],
            })),
        ),
        "AC13" => (
            "deterministic unit-step limits",
            Experiment::Limits(LimitCheck::UnitStep(UnitStepParams {
                g: 2.0,
                y: -2.0,
                theta: FRAC_PI_4,
                ns: vec![1e4, 1e6, 1e8],
            })),
        ),
        "AC14" => (
            "reflection off a sphere",
            Experiment::Reflection(ReflectionParams {
                dims: vec![2, 3, 4],
                samples: pick(s, 100_000, 10_000),
                plot_points: pick(s, 200, 20),
            }),
        ),
        "AC15" => (
            "reproducibility",
            Experiment::Reproducibility(ReproducibilityParams {
                threads: vec![1, 3],
                runs: AC_NAMES[..14].iter().map(|n| entry(n, Scale::Smoke).config).collect(),
            }),
        ),
        _ => unreachable!(),
    };
    let name_lc = format!("{}-{}", name.to_lowercase(), pick(s, "full", "smoke"));
    CatalogEntry { name, title, config: cfg(&name_lc, seed, e) }
}

fn rec(d: usize, lambda: f64, factors: &[f64], horizons: &[u64], trials: usize) -> RecurrenceCase {
    RecurrenceCase { d, lambda, level: -1.0, drop_factors: factors.to_vec(), horizons: horizons.to_vec(), trials }
}

fn recurrence_cases() -> Vec<RecurrenceCase> {
    let long = [1_000, 10_000, 100_000, 1_000_000, 10_000_000];
    let short = [1_000, 10_000, 100_000];
    vec![
        rec(1, 0.0, &[10.0], &long, 300),
        rec(1, 1.0, &[10.0], &long, 300),
        rec(2, 0.0, &[10.0], &long, 300),
        rec(2, 1.0, &[10.0], &long, 300),
        rec(3, 0.0, &[10.0, 30.0, 100.0], &[1_000, 10_000], 200),
        rec(4, 0.0, &[10.0, 30.0, 100.0], &short, 300),
        // depth grows like m^(1/4) here, so deeper drops are out of reach
        rec(4, 1.0, &[5.0, 10.0, 20.0], &short, 300),
    ]
}

fn smoke_recurrence_cases() -> Vec<RecurrenceCase> {
    vec![rec(2, 0.0, &[10.0], &[100, 1_000], 30), rec(4, 0.0, &[10.0, 30.0], &[100, 1_000], 30)]
}

/// One canned configuration per acceptance criterion.
pub fn list_experiments() -> Vec<CatalogEntry> {
    catalog(Scale::Full)
}

pub fn catalog(s: Scale) -> Vec<CatalogEntry> {
    AC_NAMES.iter().map(|n| entry(n, s)).collect()
}

/// Looks up an entry by name, case-insensitively.
pub fn find(name: &str, s: Scale) -> Option<CatalogEntry> {
    AC_NAMES.iter().find(|n| n.eq_ignore_ascii_case(name)).map(|n| entry(n, s))
}

/// The built-in `simulate` example: a few short paths in the rescaled regime.
pub fn simulate_example(max_events: u64) -> ExperimentConfig {
    cfg(
        "simulate-example",
        7,
        Experiment::Simulate(SimulateParams {
            d: 2,
            g: 1.0,
            density: konst(1.0),
            regime: RegimeSpec::Rescaled { n: 100.0 },
            y_init: -1.0,
            paths: 4,
            max_events,
            max_clock: None,
            upper_level: Some(-0.25),
            lower_level: None,
            refine: 8,
        }),
    )
}
