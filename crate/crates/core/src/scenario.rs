//! Scenario runner: builds the neutral systems once, runs the requested
//! scenarios on worker threads and collects their records in a fixed order.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use nalgebra::DMatrix;
use rand::Rng;

use crate::bumps::kappa;
use crate::config::{Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::funcrep::{l2_inner, FunctionRep};
use crate::heisenberg::{
    apply_momentum, commutator, delocalization_check, moment_identity_check, split_movers, symmetry_defect,
    OperatorTag,
};
use crate::krein::{
    chi_axis_vector, coordinate_metric_matrix, embedding_consistency, gram, metric_apply, model_grams,
    negativity_rank, v_basis_vector, GramMatrix, GramMode, KreinVector,
};
use crate::neutral::{build_chi_system, verify_neutral_system, NeutralSystem};
use crate::profile::indefinite_inner;
use crate::regularize::{decompose, hilbert_inner_of, majorant_of, majorant_norm, projection_constant};
use crate::report::{Environment, ProfileSummary, Record, Report};
use crate::sufficiency::{
    beta_tilde_estimate, check_conditions, export_model, finite_metric_solve, maximality_check,
    metric_eigenvalues, metric_identity_defect, polynomial_example, AbstractSpace, ConditionReport,
};
use crate::testfamily::{jet_balanced, random_p_function, random_test_function, regression_family, rng, GENERATOR};

/// Size of the seeded random families.
pub const FAMILY_SIZE: usize = 200;

/// A plot-ready table written next to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Writes `<dir>/<name>.csv` with a header row.
    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string())).map_err(io)?;
        }
        w.flush()?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioOutput {
    pub records: Vec<Record>,
    pub tables: Vec<Table>,
}

impl ScenarioOutput {
    fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    /// Runs `f`, turning an error into one failed record named `name`.
    fn guard(&mut self, name: &str, f: impl FnOnce(&mut ScenarioOutput) -> Result<()>) {
        let mut local = ScenarioOutput::default();
        match f(&mut local) {
            Ok(()) => {
                self.records.extend(local.records);
                self.tables.extend(local.tables);
            }
            Err(e) => {
                self.records.extend(local.records);
                self.records.push(Record::failed(name, &e));
            }
        }
    }
}

type Systems = BTreeMap<usize, Result<NeutralSystem>>;

fn system(systems: &Systems, n: usize) -> Result<&NeutralSystem> {
    match systems.get(&n) {
        Some(Ok(s)) => Ok(s),
        Some(Err(e)) => Err(e.clone()),
        None => Err(Error::Config(format!("no system built for N={n}"))),
    }
}

fn needed_truncations(cfg: &ScenarioConfig) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for s in &cfg.scenarios {
        match s {
            Scenario::Neutral | Scenario::Majorant | Scenario::Heisenberg | Scenario::Abstract => {
                out.extend(cfg.truncations.iter().copied())
            }
            Scenario::Krein => {
                out.extend(cfg.truncations.iter().copied());
                out.extend(cfg.sweep_truncations.iter().copied());
            }
            Scenario::Sweep => out.extend(cfg.sweep_truncations.iter().copied()),
        }
    }
    out
}

fn build_systems(cfg: &ScenarioConfig) -> Systems {
    let ns: Vec<usize> = needed_truncations(cfg).into_iter().collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = ns
            .iter()
            .map(|&n| {
                scope.spawn(move || {
                    let start = Instant::now();
                    let s = cfg.profile.with_truncation(n).and_then(|p| build_chi_system(&p, &cfg.quadrature));
                    debug!("built neutral system N={n} in {:.3}s", start.elapsed().as_secs_f64());
                    s
                })
            })
            .collect();
        ns.iter().zip(handles).map(|(&n, h)| (n, h.join().expect("system worker panicked"))).collect()
    })
}

pub fn environment(cfg: &ScenarioConfig) -> Environment {
    let p = &cfg.profile;
    Environment {
        profile: ProfileSummary {
            c_sq_rule: p.rule.name().to_string(),
            c_sq: p.c_sq.clone(),
            delta: p.delta,
            beta: p.beta,
            n: p.n,
            alpha: p.alpha,
            rho_param: p.rho_param,
        },
        truncations: cfg.truncations.clone(),
        sweep_truncations: cfg.sweep_truncations.clone(),
        rel_tol: cfg.quadrature.rel_tol,
        abs_tol: cfg.quadrature.abs_tol,
        max_panels: cfg.quadrature.max_panels,
        seed: cfg.seed,
        generator: GENERATOR.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Runs every scenario of `cfg`; module errors become failed records.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Report, Vec<Table>)> {
    let start = Instant::now();
    let systems = build_systems(cfg);
    let abstract_input = cfg
        .abstract_input
        .as_ref()
        .map(|path| std::fs::read_to_string(path).map_err(Error::from).and_then(|t| AbstractSpace::from_toml_str(&t)));
    let outputs: Vec<(Scenario, ScenarioOutput, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .scenarios
            .iter()
            .map(|&s| {
                let systems = &systems;
                let input = abstract_input.as_ref();
                scope.spawn(move || {
                    let t = Instant::now();
                    let out = match s {
                        Scenario::Neutral => neutral(cfg, systems),
                        Scenario::Majorant => majorant(cfg, systems),
                        Scenario::Krein => krein(cfg, systems),
                        Scenario::Abstract => abstract_checks(cfg, systems, input),
                        Scenario::Heisenberg => heisenberg(cfg, systems),
                        Scenario::Sweep => sweep(cfg, systems),
                    };
                    (s, out, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario worker panicked")).collect()
    });
    let mut report = Report::new(cfg.id(), environment(cfg));
    let mut tables = Vec::new();
    for (s, out, secs) in outputs {
        info!("{s}: {} records in {secs:.3}s", out.records.len());
        report.extend(out.records);
        tables.extend(out.tables);
        report.timing.scenarios.insert(s.name().to_string(), secs);
    }
    report.timing.total_seconds = start.elapsed().as_secs_f64();
    Ok((report, tables))
}

fn neutral(cfg: &ScenarioConfig, systems: &Systems) -> ScenarioOutput {
    let mut out = ScenarioOutput::default();
    for &n in &cfg.truncations {
        let tag = format!("neutral/N{n}");
        out.guard(&tag, |o| {
            let sys = system(systems, n)?;
            for c in verify_neutral_system(sys)? {
                o.push(Record::new(format!("{tag}/{}", c.clause), c.measured, c.bound, c.pass));
            }
            for (i, b) in sys.budgets.iter().enumerate() {
                let lhs = b.lhs_direct.max(b.lhs_sum).to_f64();
                o.push(Record::at_most(format!("{tag}/budget/{i}"), lhs, b.rhs));
                o.push(Record::at_most(format!("{tag}/budget_agreement/{i}"), b.relative_disagreement(), 1e-9));
            }
            Ok(())
        });
    }
    out
}

fn majorant(cfg: &ScenarioConfig, systems: &Systems) -> ScenarioOutput {
    let mut out = ScenarioOutput::default();
    for &n in &cfg.truncations {
        let tag = format!("majorant/N{n}");
        out.guard(&tag, |o| {
            let sys = system(systems, n)?;
            let mut g = rng(cfg.seed);
            let c = projection_constant(sys);
            let (mut dominance, mut hilbert, mut idem, mut bound) = (f64::MIN, 0.0f64, 0.0f64, f64::MIN);
            for _ in 0..FAMILY_SIZE {
                let f = random_test_function(&mut g, &sys.profile);
                let d = decompose(&f, sys)?;
                let norm = l2_inner(&f, &f, &sys.quadrature)?;
                let m = majorant_of(&d, norm, sys)?;
                let ff = indefinite_inner(&f, &f, &sys.profile, &sys.quadrature)?.value;
                dominance = dominance.max(ff.abs() - m.square());
                let h = hilbert_inner_of(&d, &d, sys)?;
                hilbert = hilbert.max((h - m.square()).abs() / m.square().max(f64::MIN_POSITIVE));
                let pf = d.remainder;
                let ppf = decompose(&pf, sys)?;
                let jet_defect = pf.jet_at_zero_ext(n)?.iter().map(|v| v.abs().to_f64()).fold(0.0, f64::max);
                let mut sample_defect = 0.0f64;
                for (lo, hi) in pf.pieces().to_vec() {
                    for j in 0..=16 {
                        let x = lo + (hi - lo) * j as f64 / 16.0;
                        sample_defect = sample_defect.max((ppf.remainder.eval(x) - pf.eval(x)).abs());
                    }
                }
                idem = idem.max(jet_defect).max(sample_defect);
                let ppf_norm = majorant_of(&ppf, l2_inner(&pf, &pf, &sys.quadrature)?, sys)?.value();
                bound = bound.max(ppf_norm - c * m.value());
            }
            o.push(Record::at_most(format!("{tag}/dominance"), dominance, 1e-8));
            o.push(Record::at_most(format!("{tag}/hilbert_consistency"), hilbert, 1e-9));
            o.push(Record::at_most(format!("{tag}/projection_idempotent"), idem, 0.0));
            o.push(Record::at_most(format!("{tag}/projection_bound"), bound, 1e-8));
            let mut unit = 0.0f64;
            for chi in &sys.chi {
                unit = unit.max((majorant_norm(chi, sys)? - 1.0).abs());
            }
            o.push(Record::at_most(format!("{tag}/chi_unit_norm"), unit, 1e-6));
            Ok(())
        });
    }
    out
}

fn random_krein_vector(g: &mut rand_chacha::ChaCha8Rng, n: usize) -> Result<KreinVector> {
    let h = random_p_function(g);
    let a = (0..=n).map(|_| g.random_range(-1.0..1.0)).collect();
    let b = (0..=n).map(|_| g.random_range(-1.0..1.0)).collect();
    KreinVector::new(h, a, b)
}

fn gram_rows(g: &GramMatrix) -> Vec<Vec<f64>> {
    g.to_rows()
}

fn krein(cfg: &ScenarioConfig, systems: &Systems) -> ScenarioOutput {
    let mut out = ScenarioOutput::default();
    let ns: BTreeSet<usize> = cfg.truncations.iter().chain(&cfg.sweep_truncations).copied().collect();
    for n in ns {
        let tag = format!("krein/N{n}");
        out.guard(&tag, |o| {
            let sys = system(systems, n)?;
            let (g, h) = model_grams(sys)?;
            o.push(Record::equals(format!("{tag}/negativity_rank"), negativity_rank(&g)? as f64, (n + 1) as f64));
            o.push(Record::equals(format!("{tag}/hilbert_negativity_rank"), negativity_rank(&h)? as f64, 0.0));
            let header: Vec<String> = (0..g.dim()).map(|k| format!("e{k}")).collect();
            o.tables.push(Table { name: format!("gram_indefinite_N{n}"), header: header.clone(), rows: gram_rows(&g) });
            o.tables.push(Table { name: format!("gram_hilbert_N{n}"), header, rows: gram_rows(&h) });

            let j = coordinate_metric_matrix(1, n);
            let sv = j.clone().svd(false, false).singular_values;
            let sv_defect = sv.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
            o.push(Record::at_most(format!("{tag}/metric_singular_values"), sv_defect, 1e-12));
            Ok(())
        });
    }

    let n = *cfg.truncations.iter().max().expect("nonempty truncations");
    let tag = format!("krein/N{n}");
    out.guard(&format!("{tag}/metric"), |o| {
        let q = &cfg.quadrature;
        let mut g = rng(cfg.seed ^ 0x5eed);
        let (mut involution, mut isometry) = (0usize, 0.0f64);
        let mut sample = Vec::new();
        for k in 0..FAMILY_SIZE {
            let (x, y) = (random_krein_vector(&mut g, n)?, random_krein_vector(&mut g, n)?);
            let jj = metric_apply(&metric_apply(&x));
            if !(jj.h.same_tree(&x.h) && jj.a == x.a && jj.b == x.b) {
                involution += 1;
            }
            let lhs = gram(&x, &metric_apply(&y), GramMode::Hilbert, q)?;
            let rhs = gram(&x, &y, GramMode::Indefinite, q)?;
            isometry = isometry.max((lhs - rhs).abs());
            if k < 12 {
                sample.push(x);
            }
        }
        o.push(Record::equals(format!("{tag}/metric_involution_failures"), involution as f64, 0.0));
        o.push(Record::at_most(format!("{tag}/metric_isometry"), isometry, 1e-12));
        let hs = GramMatrix::from_vectors(&sample, GramMode::Hilbert, q)?;
        o.push(Record::at_least(format!("{tag}/hilbert_sample_min_eigenvalue"), hs.eigenvalues()[0], f64::MIN_POSITIVE));
        let mut hyper = 0.0f64;
        for i in 0..=n {
            let (v, c) = (v_basis_vector(i, n)?, chi_axis_vector(i, n)?);
            let block = DMatrix::from_row_slice(
                2,
                2,
                &[
                    gram(&v, &v, GramMode::Indefinite, q)?,
                    gram(&v, &c, GramMode::Indefinite, q)?,
                    gram(&c, &v, GramMode::Indefinite, q)?,
                    gram(&c, &c, GramMode::Indefinite, q)?,
                ],
            );
            let ev = GramMatrix::new(block)?.eigenvalues();
            hyper = hyper.max((ev[0] + 1.0).abs()).max((ev[1] - 1.0).abs());
        }
        o.push(Record::at_most(format!("{tag}/hyperbolic_planes"), hyper, 0.0));
        Ok(())
    });
    out
}

fn condition_records(tag: &str, r: &ConditionReport) -> Vec<Record> {
    r.checks
        .iter()
        .map(|c| {
            let rec = Record::new(format!("{tag}/condition{}/{}", c.condition, c.name), c.measured, c.bound, c.pass);
            match &c.witness {
                Some(w) => rec.with_note(w.clone()),
                None => rec,
            }
        })
        .collect()
}

fn abstract_checks(cfg: &ScenarioConfig, systems: &Systems, input: Option<&Result<AbstractSpace>>) -> ScenarioOutput {
    let mut out = ScenarioOutput::default();
    let n = *cfg.truncations.iter().max().expect("nonempty truncations");
    let tag = format!("abstract/N{n}");
    out.guard(&tag, |o| {
        let sys = system(systems, n)?;
        let mut g = rng(cfg.seed);
        let family: Vec<FunctionRep> = (0..8).map(|_| random_test_function(&mut g, &sys.profile)).collect();
        let space = export_model(sys, &family)?;
        o.records.extend(condition_records(&format!("{tag}/model"), &check_conditions(&space)?));

        // chi~_0 picks up a v_0 component, so <chi~_0, chi~_0> = 2 / gamma_0
        let d = space.dim();
        let mut neutral = space.neutral.clone();
        neutral[(n + 1, 0)] += 1.0;
        let corrupted = AbstractSpace::new(space.gram.clone(), neutral, space.gamma.clone(), vec![], None)?;
        let r = check_conditions(&corrupted)?;
        let c0 = &r.checks[0];
        o.push(Record::new(format!("{tag}/corrupted_neutral_detected"), c0.measured, c0.bound, !c0.pass));

        let h = space.majorant.as_ref().ok_or(Error::MissingMajorant)?;
        let j = finite_metric_solve(&space.gram, h)?;
        o.push(Record::at_most(format!("{tag}/metric_solve_identity"), metric_identity_defect(&space.gram, h, &j), 1e-10));
        let ev = metric_eigenvalues(&space.gram, h)?;
        let unit = ev.iter().map(|e| (e.abs() - 1.0).abs()).fold(0.0, f64::max);
        o.push(Record::at_most(format!("{tag}/metric_eigenvalues_unit"), unit, 1e-10));
        let negative = ev.iter().filter(|e| **e < 0.0).count();
        o.push(Record::equals(format!("{tag}/inertia_consistency"), negative as f64, negativity_rank(&space.gram)? as f64));
        o.push(Record::equals(format!("{tag}/model_maximal"), maximality_check(&j) as u8 as f64, 1.0));
        let mut singular = j.clone();
        singular.row_mut(0).fill(0.0);
        o.push(Record::equals(format!("{tag}/singular_not_maximal"), maximality_check(&singular) as u8 as f64, 0.0));

        let mut rg = rng(cfg.seed ^ 0xa5a5);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let dim = rg.random_range(2..=d.max(2));
            let a = DMatrix::from_fn(dim, dim, |_, _| rg.random_range(-1.0..1.0));
            let hh = GramMatrix::new(&a * a.transpose() + DMatrix::identity(dim, dim) * 0.5)?;
            let gg = GramMatrix::new(DMatrix::from_fn(dim, dim, |_, _| rg.random_range(-1.0..1.0)))?;
            let jj = finite_metric_solve(&gg, &hh)?;
            worst = worst.max(metric_identity_defect(&gg, &hh, &jj));
        }
        o.push(Record::at_most(format!("{tag}/metric_solve_random"), worst, 1e-10));

        for i in 0..=n {
            let mut last = 0.0;
            let mut decreases = 0usize;
            let mut value = 0.0;
            for radius in [1.0, 10.0, 100.0] {
                let b = beta_tilde_estimate(&space, i, radius)?;
                if b.value < last {
                    decreases += 1;
                }
                last = b.value;
                value = b.value;
            }
            o.push(
                Record::equals(format!("{tag}/beta_tilde_monotone/{i}"), decreases as f64, 0.0)
                    .with_note(format!("beta~_{i}(R=100) = {value:e}")),
            );
        }
        Ok(())
    });

    out.guard("abstract/polynomial", |o| {
        let space = polynomial_example(200, 1.0, 0.25, 1.0, 8, cfg.seed)?;
        let r = check_conditions(&space)?;
        o.records.extend(condition_records("abstract/polynomial", &r));
        Ok(())
    });

    if let Some(input) = input {
        out.guard("abstract/input", |o| {
            let space = input.as_ref().map_err(Clone::clone)?;
            o.records.extend(condition_records("abstract/input", &check_conditions(space)?));
            Ok(())
        });
    }
    out
}

fn heisenberg(cfg: &ScenarioConfig, systems: &Systems) -> ScenarioOutput {
    let mut out = ScenarioOutput::default();
    for &n in &cfg.truncations {
        let tag = format!("heisenberg/N{n}");
        out.guard(&tag, |o| {
            let sys = system(systems, n)?;
            let (p, q) = (&sys.profile, &sys.quadrature);
            let mut g = rng(cfg.seed);
            let ps: Vec<FunctionRep> = (0..20).map(|_| random_p_function(&mut g)).collect();
            for op in [OperatorTag::Momentum, OperatorTag::Position] {
                let mut worst = 0.0f64;
                for pair in ps.chunks(2) {
                    worst = worst.max(symmetry_defect(op, &pair[0], &pair[1], p, q)?);
                }
                let name = match op {
                    OperatorTag::Momentum => "momentum",
                    OperatorTag::Position => "position",
                };
                o.push(Record::at_most(format!("{tag}/symmetry/{name}"), worst, 1e-8));
            }

            let mut leaks = 0usize;
            for f in &ps {
                leaks += apply_momentum(f).jet_at_zero_ext(n)?.iter().filter(|v| !v.is_zero()).count();
            }
            o.push(Record::equals(format!("{tag}/momentum_preserves_p"), leaks as f64, 0.0));

            let mut mismatches = 0usize;
            for f in regression_family().iter().chain(&ps) {
                let c = commutator(f)?;
                for j in 0..64 {
                    let x = -4.0 + 8.0 * j as f64 / 63.0;
                    if c.real.eval(x).to_bits() != f.eval(x).to_bits() {
                        mismatches += 1;
                    }
                }
                if let (Ok(a), Ok(b)) = (c.real.jet_at_zero_ext(n), f.jet_at_zero_ext(n)) {
                    mismatches += a.iter().zip(&b).filter(|(x, y)| x != y).count();
                }
            }
            o.push(Record::equals(format!("{tag}/commutation_mismatches"), mismatches as f64, 0.0));

            let mut worst = 0.0f64;
            for f in regression_family() {
                for k in 0..=8 {
                    worst = worst.max(moment_identity_check(&f, k, q)?.defect());
                }
            }
            o.push(Record::at_most(format!("{tag}/moment_identity"), worst, 1e-6));

            let mut worst = 0.0f64;
            for f in ps.iter().take(10) {
                for i in 0..=n {
                    worst = worst.max(delocalization_check(i, f, sys)?.abs());
                }
            }
            o.push(Record::at_most(format!("{tag}/delocalization"), worst, 1e-8));

            let f = FunctionRep::sum(vec![kappa(-2).profile, kappa(3).profile]);
            let (minus, plus) = split_movers(&f)?;
            let mut defect = l2_inner(&minus, &plus, q)?.abs();
            for j in 0..64 {
                let x = -4.0 + 8.0 * j as f64 / 63.0;
                defect = defect.max((minus.eval(x) + plus.eval(x) - f.eval(x)).abs());
            }
            o.push(Record::at_most(format!("{tag}/split_movers"), defect, 0.0));
            Ok(())
        });
    }
    out
}

/// Pairs whose truncation error decays like `r^{2N}`.
pub fn generic_pairs(cfg: &ScenarioConfig) -> Result<Vec<(FunctionRep, FunctionRep)>> {
    let top = *cfg.sweep_truncations.iter().max().expect("nonempty sweep");
    let p = cfg.profile.with_truncation(top + 4)?;
    let degree = top + 4;
    Ok(vec![
        (jet_balanced(&p, 0.5, 1e-4, degree), jet_balanced(&p, 0.5, 1e-4, degree)),
        (jet_balanced(&p, 0.6, 1e-4, degree), jet_balanced(&p, 0.4, 2e-4, degree)),
    ])
}

fn sweep(cfg: &ScenarioConfig, systems: &Systems) -> ScenarioOutput {
    let mut out = ScenarioOutput::default();
    let ns = &cfg.sweep_truncations;
    let mut rows = Vec::new();
    for &n in ns {
        let tag = format!("sweep/span/N{n}");
        out.guard(&tag, |o| {
            let sys = system(systems, n)?;
            let mut g = rng(cfg.seed ^ n as u64);
            let mut pairs = Vec::new();
            for _ in 0..4 {
                let mut mk = || {
                    let mut terms: Vec<(f64, FunctionRep)> =
                        sys.chi.iter().map(|c| (g.random_range(-1.0..1.0), c.clone())).collect();
                    terms.push((1.0, random_p_function(&mut g)));
                    FunctionRep::combine(&terms)
                };
                pairs.push((mk()?, mk()?));
            }
            pairs.push((FunctionRep::zero(), sys.chi[0].clone()));
            let r = embedding_consistency(&pairs, &[sys])?;
            let (mut worst, mut bound, mut ratio) = (0.0, 0.0, -1.0);
            for row in &r.rows {
                let s = row.error / row.bound.max(f64::MIN_POSITIVE);
                if s > ratio {
                    (worst, bound, ratio) = (row.error, row.bound, s);
                }
            }
            o.push(Record::at_most(format!("{tag}/embedding_error"), worst, bound));
            Ok(())
        });
    }
    out.guard("sweep/generic", |o| {
        let sys_list: Vec<&NeutralSystem> = ns.iter().map(|&n| system(systems, n)).collect::<Result<_>>()?;
        let pairs = generic_pairs(cfg)?;
        let r = embedding_consistency(&pairs, &sys_list)?;
        for row in &r.rows {
            rows.push(vec![row.pair as f64, row.n as f64, row.error, row.bound]);
            o.push(Record::at_most(format!("sweep/generic/pair{}/N{}/within_bound", row.pair, row.n), row.error, row.bound));
        }
        for (k, dec) in r.strictly_decreasing.iter().enumerate() {
            let errs: Vec<f64> = r.rows.iter().filter(|x| x.pair == k).map(|x| x.error).collect();
            let steps = errs.windows(2).filter(|w| w[1] >= w[0]).count();
            o.push(Record::new(format!("sweep/generic/pair{k}/strictly_decreasing"), steps as f64, 0.0, *dec));
        }
        Ok(())
    });
    out.tables.push(Table {
        name: "embedding_consistency".into(),
        header: ["pair", "N", "error", "bound"].map(String::from).to_vec(),
        rows,
    });
    out
}
