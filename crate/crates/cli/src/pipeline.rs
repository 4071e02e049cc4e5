//! Stage runners. Each stage computes what it needs from earlier stages on
//! demand and caches it, so a single subcommand can run in isolation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use platecont_core::carleman::{bump_battery, carleman_sweep, hardy_battery, hardy_extremal, sample_bump, tau_grid, CarlemanWeight};
use platecont_core::chart::ChartField;
use platecont_core::conformal::{flatten, pullback, ConformalMap, FlattenOptions};
use platecont_core::error::Error;
use platecont_core::expr::Expr;
use platecont_core::geometry::{BoundaryGraph, ExactField, PointEval, Region};
use platecont_core::grid::{analytic, ScalarField};
use platecont_core::plate::{graph_chart, solve_plate, solve_plate_flat, GraphClampedData, PlateMaterial, GRAPH_CHART_MARGIN};
use platecont_core::reflection::{default_tests, reflect_solution, trace_report, verify_weak_form, TestBump};
use platecont_core::threespheres::{sucp_lower_bound, three_spheres_curved, three_spheres_flat, ThreeSpheresConfig};

use crate::scenario::Scenario;

/// Why a stage could not produce a verdict.
#[derive(Debug)]
pub enum StageError {
    Config(String),
    Solver(String),
    Failed(String),
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StageError::Failed(_) => 1,
            StageError::Config(_) => 2,
            StageError::Solver(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            StageError::Config(m) | StageError::Solver(m) | StageError::Failed(m) => m,
        }
    }
}

impl From<Error> for StageError {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Parse(_)
            | Error::InvalidInput(_)
            | Error::InvalidParameter(_)
            | Error::InvalidMaterial { .. }
            | Error::OutOfRange(_) => StageError::Config(m),
            Error::Solver(_) | Error::NonExact { .. } | Error::NonInjective(_) | Error::Extrapolation(_) | Error::Io(_) => {
                StageError::Solver(m)
            }
            _ => StageError::Failed(m),
        }
    }
}

pub type StageResult<T> = Result<T, StageError>;

/// A CSV table written next to a stage report.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub pass: bool,
    pub report: Value,
    pub tables: Vec<Table>,
}

enum Solved {
    Flat { u: ScalarField },
    Curved { v: ChartField, u: ScalarField },
}

impl Solved {
    fn upper(&self) -> &ScalarField {
        match self {
            Solved::Flat { u } | Solved::Curved { u, .. } => u,
        }
    }
}

pub struct Pipeline {
    sc: Scenario,
    graph: BoundaryGraph,
    material: PlateMaterial,
    map: Option<ConformalMap>,
    solved: Option<(Solved, StageOutcome)>,
    spheres: Option<(StageOutcome, f64)>,
}

fn parse_expr(src: &str, what: &str) -> StageResult<Expr> {
    Expr::parse(src).map_err(|e| StageError::Config(format!("{what}: {e}")))
}

fn material(sc: &Scenario) -> StageResult<PlateMaterial> {
    let m = &sc.material;
    let mut p = match (m.lambda.trim().parse::<f64>(), m.mu.trim().parse::<f64>()) {
        (Ok(l), Ok(mu)) => PlateMaterial::constant(l, mu, m.thickness),
        _ => PlateMaterial {
            lambda: parse_expr(&m.lambda, "material.lambda")?,
            mu: parse_expr(&m.mu, "material.mu")?,
            thickness: m.thickness,
            alpha0: 0.25,
            gamma0: 0.5,
            lambda0: 100.0,
        },
    };
    p.alpha0 = m.alpha0.unwrap_or(p.alpha0);
    p.gamma0 = m.gamma0.unwrap_or(p.gamma0);
    p.lambda0 = m.lambda0.unwrap_or(p.lambda0);
    Ok(p)
}

impl Pipeline {
    pub fn new(sc: Scenario) -> StageResult<Self> {
        let b = &sc.boundary;
        let graph = match &b.graph {
            None => BoundaryGraph::flat(b.r0, b.m0),
            Some(src) => BoundaryGraph::from_expr(src, b.r0, b.m0, b.alpha)?,
        };
        let material = material(&sc)?;
        Ok(Pipeline { sc, graph, material, map: None, solved: None, spheres: None })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.sc
    }

    pub fn run(&mut self, stage: &str) -> StageResult<StageOutcome> {
        match stage {
            "flatten" => self.flatten(),
            "solve" => self.solve(),
            "reflect" => self.reflect(),
            "carleman" => self.carleman(),
            "three-spheres" => self.three_spheres(),
            "sucp" => self.sucp(),
            other => Err(StageError::Config(format!("unknown stage '{other}'"))),
        }
    }

    fn map(&mut self) -> StageResult<&ConformalMap> {
        if self.map.is_none() {
            let b = &self.sc.boundary;
            let opts = FlattenOptions { mesh: b.flatten_mesh, probes: b.probes, closure_tol: b.closure_tol };
            self.map = Some(flatten(&self.graph, opts)?);
        }
        Ok(self.map.as_ref().unwrap())
    }

    fn flatten(&mut self) -> StageResult<StageOutcome> {
        let norm = self.graph.norm;
        let map = self.map()?;
        let pass = map.certificate.passed() && map.k_constant > 8.0;
        let report = json!({
            "r0": map.r0,
            "M0": map.m0,
            "graph_norm": norm,
            "c0": map.c0,
            "C0": map.c0_upper,
            "K": map.k_constant,
            "a": map.a,
            "b": map.b,
            "certificate": map.certificate,
        });
        Ok(StageOutcome { stage: "flatten", pass, report, tables: vec![] })
    }

    fn ensure_solved(&mut self) -> StageResult<()> {
        if self.solved.is_some() {
            return Ok(());
        }
        let n = self.sc.mesh;
        let solved = if self.sc.is_flat() {
            let sol = &self.sc.solution;
            let outer = parse_expr(&sol.outer, "solution.outer")?;
            let forcing = sol.forcing.as_deref().map(|f| parse_expr(f, "solution.forcing")).transpose()?;
            let (u, stats, traces) = solve_plate_flat(n, &self.material, &outer, forcing.as_ref().map(|f| f as _))?;
            let h = 1.0 / (n - 1) as f64;
            let sup = u.max_abs();
            let error = sol.exact.then(|| {
                let g = *u.grid();
                u.values().indexed_iter().map(|((i, j), v)| (v - outer.eval(g.x(i), g.y(j))).abs()).fold(0.0, f64::max)
            });
            let bound = 5.0 * h * h * sup;
            let pass = traces.normal_one_sided <= 10.0 * h * h && error.map_or(true, |e| e <= bound);
            let report = json!({
                "mesh": n, "h": h, "stats": stats, "traces": traces,
                "max_error": error, "error_bound": error.map(|_| bound),
            });
            (Solved::Flat { u }, StageOutcome { stage: "solve", pass, report, tables: vec![] })
        } else {
            let r0 = self.graph.r0;
            let chart = graph_chart(self.graph.g.clone(), r0, n)?;
            let outer = GraphClampedData { g: self.graph.g.clone(), r0 };
            let sol = solve_plate(&chart, &self.material, &outer, None)?;
            let material = self.material.clone();
            let map = self.map()?;
            let pb = pullback(&sol.field, map, &material, n)?;
            let h = GRAPH_CHART_MARGIN * r0 / (n - 1) as f64;
            let pass = sol.traces.normal_one_sided <= 10.0 * h * h;
            let report = json!({
                "mesh": n, "h": h, "stats": sol.stats, "traces": sol.traces,
                "pullback": { "mesh": n, "M1": pb.m1, "max_abs": pb.u.max_abs() },
            });
            (Solved::Curved { v: sol.field, u: pb.u }, StageOutcome { stage: "solve", pass, report, tables: vec![] })
        };
        self.solved = Some(solved);
        Ok(())
    }

    fn solve(&mut self) -> StageResult<StageOutcome> {
        self.ensure_solved()?;
        Ok(self.solved.as_ref().unwrap().1.clone())
    }

    fn constant_unforced(&self) -> bool {
        let m = &self.sc.material;
        m.lambda.trim().parse::<f64>().is_ok() && m.mu.trim().parse::<f64>().is_ok() && self.sc.solution.forcing.is_none()
    }

    fn tests(&self) -> Vec<TestBump> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.sc.seed);
        let mut t = default_tests();
        for _ in 0..3 {
            let radius = rng.gen_range(0.2..0.4);
            let rho = rng.gen_range(0.0..0.9 - radius);
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            t.push(TestBump { center: (rho * ang.cos(), rho * ang.sin()), radius });
        }
        t
    }

    fn reflect(&mut self) -> StageResult<StageOutcome> {
        self.ensure_solved()?;
        let weak_applicable = self.sc.is_flat() && self.constant_unforced();
        let tests = self.tests();
        let u = self.solved.as_ref().unwrap().0.upper();
        let h = u.grid().hy;
        let tol = 10.0 * h * h;
        let pair = reflect_solution(u, tol)?;
        let tr = trace_report(&pair);
        let weak = if weak_applicable { Some(verify_weak_form(&pair.ubar, None, &tests)?) } else { None };
        let pass = tr.max() <= tol && weak.map_or(true, |w| w <= tol);
        let report = json!({
            "h": h, "tolerance": tol, "traces": tr, "trace_max": tr.max(),
            "weak_form_residual": weak,
            "test_bumps": tests.iter().map(|t| json!({"center": [t.center.0, t.center.1], "radius": t.radius})).collect::<Vec<_>>(),
        });
        Ok(StageOutcome { stage: "reflect", pass, report, tables: vec![] })
    }

    fn carleman(&mut self) -> StageResult<StageOutcome> {
        let w = &self.sc.weight;
        let weight = CarlemanWeight::new(w.epsilon, w.tau_bar, w.r_tilde0)?;
        let taus = tau_grid(w.tau_min, w.tau_max, w.tau_samples);
        let battery = bump_battery();
        let mut columns = Vec::new();
        let mut bumps = Vec::new();
        let mut pass = true;
        for b in &battery {
            let u = sample_bump(*b, w.carleman_mesh, true)?;
            let s = carleman_sweep(&u, &taus, &weight)?;
            let max = s.iter().map(|s| s.ratio).fold(0.0, f64::max);
            let finite = s.iter().all(|s| s.ratio.is_finite() && !s.violation);
            pass &= finite;
            bumps.push(json!({ "bump": b, "max_ratio": max, "finite": finite }));
            columns.push(s);
        }
        let hardy = hardy_battery()?;
        let hardy_ok = hardy.iter().all(|(_, r)| *r <= 1.0 + 1e-3);
        let extremal = [0.1, 0.05, 0.02, 0.01].iter().map(|&d| Ok((d, hardy_extremal(d)?))).collect::<Result<Vec<_>, Error>>()?;
        let monotone = extremal.windows(2).all(|p| p[1].1 > p[0].1);
        pass &= hardy_ok && monotone;
        let mut header = vec!["tau".to_string()];
        header.extend((1..=battery.len()).map(|k| format!("ratio_{k}")));
        let rows = (0..taus.len()).map(|i| std::iter::once(taus[i]).chain(columns.iter().map(|c| c[i].ratio)).collect()).collect();
        let report = json!({
            "epsilon": weight.epsilon, "tau_bar": weight.tau_bar, "r_tilde0": weight.r_tilde0,
            "mesh": w.carleman_mesh, "taus": taus, "bumps": bumps,
            "hardy": hardy.iter().map(|(n, r)| json!({"f": n, "ratio": r})).collect::<Vec<_>>(),
            "hardy_extremal": extremal.iter().map(|(d, r)| json!({"delta": d, "ratio": r, "closed_form": 1.0 / (1.0 + 2.0 * d)})).collect::<Vec<_>>(),
            "hardy_monotone": monotone,
        });
        Ok(StageOutcome { stage: "carleman", pass, report, tables: vec![Table { name: "carleman".into(), header, rows }] })
    }

    fn spheres_config(&self) -> ThreeSpheresConfig {
        let t = &self.sc.three_spheres;
        ThreeSpheresConfig {
            epsilon: self.sc.weight.epsilon,
            c_exp_grid: t.c_exp_grid.clone(),
            ceiling: t.ceiling,
            tau_bar: self.sc.weight.tau_bar,
        }
    }

    fn three_spheres(&mut self) -> StageResult<StageOutcome> {
        if let Some((o, _)) = &self.spheres {
            return Ok(o.clone());
        }
        self.ensure_solved()?;
        if !self.sc.is_flat() {
            self.map()?;
        }
        let cfg = self.spheres_config();
        let mut reports = Vec::new();
        let mut rows = Vec::new();
        let mut pass = true;
        let mut big_c = 1.0f64;
        let spacing = self.sc.three_spheres.spacing;
        for &[a, b, r0] in &self.sc.three_spheres.radii {
            match &self.solved.as_ref().unwrap().0 {
                Solved::Flat { u } => {
                    let rep = three_spheres_flat(u, a, b, r0, &cfg)?;
                    pass &= rep.pass;
                    big_c = big_c.max(rep.c_emp).max(rep.c_exp);
                    rows.push(vec![a, b, r0, rep.theta_tilde, rep.tau_star.unwrap_or(f64::NAN), rep.c_emp]);
                    reports.push(serde_json::to_value(&rep).unwrap());
                }
                Solved::Curved { v, .. } => {
                    let rep = three_spheres_curved(v, self.map.as_ref().unwrap(), a, b, r0, spacing, &cfg)?;
                    pass &= rep.pass;
                    big_c = big_c.max(rep.flat.c_emp).max(rep.flat.c_exp);
                    rows.push(vec![rep.flat.r, rep.flat.big_r, r0, rep.theta_tilde, rep.flat.tau_star.unwrap_or(f64::NAN), rep.flat.c_emp]);
                    reports.push(serde_json::to_value(&rep).unwrap());
                }
            }
        }
        let header = ["r", "R", "R0", "theta_tilde", "tau_star", "C_emp"].map(String::from).to_vec();
        let out = StageOutcome {
            stage: "three-spheres",
            pass,
            report: json!({ "config": cfg, "reports": reports, "C": big_c }),
            tables: vec![Table { name: "three-spheres".into(), header, rows }],
        };
        self.spheres = Some((out.clone(), big_c));
        Ok(out)
    }

    fn sucp(&mut self) -> StageResult<StageOutcome> {
        self.three_spheres()?;
        let big_c = self.spheres.as_ref().unwrap().1;
        let s = &self.sc.sucp;
        let (report, c) = match &self.solved.as_ref().unwrap().0 {
            Solved::Flat { u } => {
                let c = s.c.expect("validated");
                (sucp_lower_bound(u, &Region::HalfDisc, s.radii, c, big_c, s.profile_points)?, c)
            }
            Solved::Curved { v, .. } => {
                let map = self.map.as_ref().unwrap();
                let c = self.sc.three_spheres.radii[0][2] / (2.0 * map.k_constant);
                let region = Region::Domain(self.graph.g.clone());
                (sucp_lower_bound(v as &dyn PointEval, &region, s.radii, c, big_c, s.profile_points)?, c)
            }
        };
        let control_field = ExactField {
            field: analytic("exp(-1/s)", |x, y| (-(x * x + y * y).sqrt().recip()).exp()),
            spacing: self.sc.three_spheres.spacing,
        };
        let control = sucp_lower_bound(&control_field, &Region::HalfDisc, s.radii, c, big_c, s.profile_points)?;
        let pass = report.pass && report.a < 1.0 && !control.pass;
        let rows = report.profile_radii.iter().zip(&report.profile_sigma).map(|(r, s)| vec![*r, *s]).collect();
        let out = json!({ "report": report, "negative_control": control, "control_flagged": !control.pass });
        Ok(StageOutcome {
            stage: "sucp",
            pass,
            report: out,
            tables: vec![Table { name: "sigma-profile".into(), header: vec!["s".into(), "sigma".into()], rows }],
        })
    }
}

/// Fast library-level checks run by `verify-all` next to the scenario stages.
pub fn property_checks() -> StageResult<StageOutcome> {
    use platecont_core::carleman::{weight_phi, weight_phi_quadrature};
    use platecont_core::threespheres::{optimal_tau, theta_tilde};
    let c = PlateMaterial::constant(1.0, 1.0, 1.0).coefficients(0.3, 0.2);
    let coeff_ok = (c.nu - 0.25).abs() <= 1e-14 && (c.e - 2.5).abs() <= 1e-14 && (c.b - 2.0 / 9.0).abs() <= 1e-14;
    let mut weight_err = 0.0f64;
    let mut bounds_ok = true;
    for k in 0..=1000 {
        let s = k as f64 / 1000.0;
        let q = weight_phi_quadrature(s, 0.5)?;
        weight_err = weight_err.max((q - s / (1.0 + s.sqrt()).powi(2)).abs());
        let p = weight_phi(s, 0.5)?;
        bounds_ok &= (-2f64).exp() * s <= p && p <= s;
    }
    let th = theta_tilde(0.05, 0.1, 0.4)?;
    let pi16 = |s: f64| std::f64::consts::PI * s.powi(6) / 16.0;
    let tau = optimal_tau(pi16(0.05), pi16(0.4), 0.05, 0.4, 0.5)?;
    let pass = coeff_ok && weight_err <= 1e-10 && bounds_ok && (th - 0.25).abs() <= 1e-15 && (tau - 1.0).abs() <= 1e-12;
    let report = json!({
        "coefficients": { "nu": c.nu, "E": c.e, "B": c.b, "pass": coeff_ok },
        "weight_quadrature_error": weight_err, "weight_bounds": bounds_ok,
        "theta_tilde": th, "tau_star": tau,
    });
    Ok(StageOutcome { stage: "properties", pass, report, tables: vec![] })
}
