//! One function per subcommand, each returning its artifacts.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde_json::{json, Value};

use revlab::busemann::{self, growth_check, lemma_constants, LemmaConstants, Ray};
use revlab::comparison;
use revlab::cutlocus::{cut_locus, CutStructure};
use revlab::distance::distance_with;
use revlab::geodesic::{self, conjugate_point, shoot_until_exit, GeodesicPath};
use revlab::warp::SurfaceModel;

use crate::output::{Artifacts, Status};
use crate::svg::{LinePlot, PolarChart};
use crate::{CliError, Context, PolarPoint};

fn config(ctx: &Context) -> Value {
    serde_json::to_value(&ctx.config).expect("config serializes")
}

fn surface_id(s: &SurfaceModel) -> Value {
    json!({ "kind": s.name(), "params": s.curvature().params(), "t_max": s.t_max() })
}

pub fn surface(ctx: &Context, i: usize) -> Result<Artifacts, CliError> {
    let s = ctx.surface(i);
    let sum = s.summary();
    let tc = sum.total_curvature;
    let cohn_vossen = tc.c <= 2.0 * PI + tc.bound;
    let tails: Vec<(f64, f64)> = (0..=8)
        .map(|k| {
            let r = s.t_max() * k as f64 / 8.0;
            (r, s.tail_integral(r))
        })
        .collect();
    let mut a = Artifacts::new(Status::from_count(usize::from(!tc.certified) + usize::from(!cohn_vossen)));
    a.json(
        "surface.json",
        &json!({
            "config": config(ctx),
            "surface": sum,
            "checks": { "identity_certified": tc.certified, "cohn_vossen": cohn_vossen },
            "tail_integral": tails,
        }),
    );
    let w = s.warp();
    let rows = w
        .grid()
        .iter()
        .zip(w.f_samples())
        .zip(w.df_samples())
        .map(|((&t, &f), &df)| (t, s.g(t), f, df));
    a.csv("warp.csv", &["t", "G", "f", "df"], rows);
    a.csv("identity.csv", &["t", "residual"], s.identity_residuals());
    Ok(a)
}

fn pole_path(s: &SurfaceModel, theta: f64, length: f64) -> GeodesicPath {
    let mut p = geodesic::meridian(s, theta);
    p.states.retain(|st| st.s <= length);
    if length < p.length {
        p.length = length;
        p.left_domain = None;
    } else {
        p.left_domain = Some(p.length);
    }
    p
}

pub fn geodesic(ctx: &Context, t0: f64, theta0: f64, phi0: f64, length: f64) -> Result<Artifacts, CliError> {
    let s = ctx.surface(0);
    if !(length > 0.0 && length.is_finite()) {
        return Err(CliError::input("--length", "must be positive"));
    }
    let path = if t0 == 0.0 {
        pole_path(s, phi0, length)
    } else {
        shoot_until_exit(s, t0, theta0, phi0, length, geodesic::DEFAULT_TOL)?
    };
    let conj = conjugate_point(s, &path)?;
    let mut a = Artifacts::new(Status::Pass);
    a.json(
        "geodesic.json",
        &json!({
            "config": config(ctx),
            "surface": surface_id(s),
            "start": path.start,
            "phi0": path.phi0,
            "nu": path.nu,
            "length": path.length,
            "left_domain": path.left_domain,
            "conjugate_point": conj,
            "end": path.end(),
            "speed_drift": path.speed_drift(s),
            "clairaut_drift": path.clairaut_drift(s),
        }),
    );
    a.csv(
        "path.csv",
        &["s", "t", "theta", "dtds", "dthetads"],
        path.states.iter().map(|st| (st.s, st.t, st.theta, st.dtds, st.dthetads)),
    );
    let extent = path.states.iter().map(|st| st.t).fold(t0, f64::max);
    let mut chart = PolarChart::new(1.05 * extent);
    let pts: Vec<_> = path.states.iter().map(|st| (st.t, st.theta)).collect();
    chart.path(&pts, 0);
    chart.point(t0, theta0, 1);
    chart.legend(format!("{}: geodesic from ({t0}, {theta0}) at angle {phi0}", s.name()));
    a.svg("geodesic.svg", chart.finish("Geodesic"));
    Ok(a)
}

pub fn distance(ctx: &Context, x: PolarPoint, y: PolarPoint) -> Result<Artifacts, CliError> {
    let s = ctx.surface(0);
    let r = distance_with(s, (x.0, x.1), (y.0, y.1), &ctx.overrides.distance_plan())?;
    let mut a = Artifacts::new(Status::Pass);
    a.json(
        "distance.json",
        &json!({ "config": config(ctx), "surface": surface_id(s), "x": x, "y": y, "distance": r }),
    );
    Ok(a)
}

pub fn cutlocus(ctx: &Context, i: usize, t0: f64) -> Result<Artifacts, CliError> {
    let s = ctx.surface(i);
    let fan = ctx.overrides.n("fan");
    let rep = cut_locus(s, t0, fan)?;
    let nonconforming = s.is_von_mangoldt() && rep.structure == CutStructure::Other;
    let mut a = Artifacts::new(Status::from_count(usize::from(nonconforming)));
    a.json(
        "cutlocus.json",
        &json!({
            "config": config(ctx),
            "surface": surface_id(s),
            "von_mangoldt": s.is_von_mangoldt(),
            "cut_locus": rep,
        }),
    );
    a.csv(
        "cutlocus.csv",
        &["phi0", "s_conj", "s_cross", "s_cut", "cause", "t", "theta"],
        rep.records.iter().map(|r| {
            let cause = r.cause.map(|c| format!("{c:?}").to_lowercase());
            (r.phi0, r.s_conj, r.s_cross, r.s_cut, cause, r.point.map(|p| p.0), r.point.map(|p| p.1))
        }),
    );
    let far = rep.points.iter().map(|p| p.t).fold(t0, f64::max);
    let extent = (1.5 * far).min(s.t_max());
    let mut chart = PolarChart::new(extent);
    let n_paths = ctx.overrides.n("fan_paths").min(fan);
    let paths: Vec<Vec<(f64, f64)>> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let phi = -PI + 2.0 * PI * (k as f64 + 0.5) / n_paths as f64;
            let rec = rep
                .records
                .iter()
                .min_by(|a, b| (a.phi0 - phi).abs().total_cmp(&(b.phi0 - phi).abs()))
                .expect("fan is non-empty");
            let len = rec.s_cut.unwrap_or(3.0 * extent);
            let p = shoot_until_exit(s, t0, 0.0, rec.phi0, len, geodesic::DEFAULT_TOL)?;
            Ok(p.states.iter().map(|st| (st.t, st.theta)).collect())
        })
        .collect::<Result<_, revlab::Error>>()?;
    for p in &paths {
        chart.path(p, 0);
    }
    for p in &rep.points {
        chart.point(p.t, p.theta, 1);
    }
    chart.point(t0, 0.0, 2);
    chart.legend(format!(
        "{}: {n_paths} fan geodesics from ({t0}, 0) up to their cut points; {} cut points; structure {:?}",
        s.name(),
        rep.points.len(),
        rep.structure
    ));
    a.svg("cutlocus.svg", chart.finish("Cut locus"));
    Ok(a)
}

fn constants_json(k: &LemmaConstants) -> Value {
    json!({ "lambda0": k.lambda0, "sin_lambda0": k.sin_lambda0, "r1": k.r1, "r2": k.r2, "r3": k.r3 })
}

pub fn lemmas(ctx: &Context, i: usize) -> Result<(Artifacts, LemmaConstants), CliError> {
    let s = ctx.surface(i);
    let k = lemma_constants(s, &ctx.overrides.lemma_plan(), &ctx.overrides.distance_plan())?;
    let bad = usize::from(k.r3_diagnostics.margin < 0.0)
        + usize::from(!(k.tail_at_r1 < k.lambda0))
        + usize::from(!(k.r2_diagnostics.min_ray_radius > k.r1));
    let mut a = Artifacts::new(Status::from_count(bad));
    a.json(
        "lemmas.json",
        &json!({
            "config": config(ctx),
            "surface": surface_id(s),
            "constants": constants_json(&k),
            "details": k,
        }),
    );
    Ok((a, k))
}

pub fn busemann(ctx: &Context, xs: &[PolarPoint], ray_theta: f64) -> Result<Artifacts, CliError> {
    let s = ctx.surface(0);
    let ray = Ray::meridian(ray_theta);
    let plan = ctx.overrides.distance_plan();
    let est = xs
        .par_iter()
        .map(|x| busemann::busemann(s, &ray, (x.0, x.1), None, &plan))
        .collect::<Result<Vec<_>, _>>()?;
    let unconverged = est.iter().filter(|e| !e.converged).count();
    let status = if unconverged == 0 {
        Status::Pass
    } else {
        Status::Gate(format!("{unconverged} estimates did not converge before T_max"))
    };
    let mut a = Artifacts::new(status);
    let rows: Vec<Value> = xs
        .iter()
        .zip(&est)
        .map(|(x, e)| json!({ "x": x, "estimate": e }))
        .collect();
    a.json(
        "busemann.json",
        &json!({ "config": config(ctx), "surface": surface_id(s), "ray": ray, "values": rows }),
    );
    a.csv(
        "busemann.csv",
        &["t", "theta", "value", "upper", "horizon", "increment", "converged"],
        xs.iter()
            .zip(&est)
            .map(|(x, e)| (x.0, x.1, e.value, e.upper, e.horizon, e.increment, e.converged)),
    );
    Ok(a)
}

pub fn verify_tct(ctx: &Context, delta0: f64) -> Result<Artifacts, CliError> {
    if ctx.surfaces.len() != 2 {
        return Err(CliError::input("--surface", "verify-tct takes exactly two surfaces: M, then the model"));
    }
    let (m, model) = (ctx.surface(0), ctx.surface(1));
    let r = comparison::verify_tct(
        m,
        model,
        delta0,
        ctx.overrides.n("triangles"),
        ctx.seed,
        ctx.overrides.tol("tct"),
        ctx.overrides.sector_plan(),
        &ctx.overrides.distance_plan(),
    )?;
    let mut a = Artifacts::new(Status::from_count(r.violations.len()));
    a.json(
        "verify-tct.json",
        &json!({
            "config": config(ctx),
            "pairs": [surface_id(m), surface_id(model)],
            "n": r.n,
            "violations": r.violations.len(),
            "margins": r.margins,
            "max_abs_margin": r.max_abs_margin,
            "anomalies": r.anomalies.len(),
            "domination": r.domination,
            "sector": r.sector,
            "violation_samples": r.violations,
            "anomaly_samples": r.anomalies,
        }),
    );
    a.csv(
        "verify-tct.csv",
        &["a", "b", "delta_theta", "c", "margin_apex", "margin_x", "margin_y"],
        r.samples
            .iter()
            .map(|t| (t.a, t.b, t.delta_theta, t.m.c, t.margins.apex, t.margins.x, t.margins.y)),
    );
    Ok(a)
}

pub fn verify_exhaustion(
    ctx: &Context,
    i: usize,
    delta0: f64,
    ray_theta: f64,
    constants: Option<LemmaConstants>,
) -> Result<Artifacts, CliError> {
    let s = ctx.surface(i);
    let plan = ctx.overrides.distance_plan();
    let k = match constants {
        Some(k) => k,
        None => lemma_constants(s, &ctx.overrides.lemma_plan(), &plan)?,
    };
    let ray = Ray::meridian(ray_theta);
    let r_hi = (16.0 * k.r2).min(0.5 * s.t_max());
    let growth = growth_check(
        s,
        &ray,
        &k,
        delta0,
        ctx.overrides.n("growth"),
        r_hi,
        ctx.seed,
        ctx.overrides.tol("growth"),
        &plan,
    )?;
    let radii: Vec<f64> = (1..=ctx.overrides.n("radii") as i32)
        .map(|j| k.r2 * 1.5f64.powi(j))
        .filter(|&r| r < 0.5 * s.t_max())
        .collect();
    let exh = busemann::exhaustion_check(
        s,
        &[ray],
        &radii,
        ctx.overrides.n("n_theta"),
        Some(&k),
        delta0,
        ctx.overrides.tol("exhaustion"),
        &plan,
    )?;
    let n_bad = growth.violations.len() + exh.violations.len() + exh.floor_violations.len();
    let mut status = Status::from_count(n_bad);
    if exh.unconverged > 0 {
        status = status.combine(Status::Gate(format!("{} Busemann estimates did not converge", exh.unconverged)));
    }
    let mut a = Artifacts::new(status);
    let series: Vec<(f64, f64)> = exh.series.iter().map(|p| (p.r, p.m)).collect();
    a.json(
        "verify-exhaustion.json",
        &json!({
            "config": config(ctx),
            "surface": surface_id(s),
            "constants": constants_json(&k),
            "series": series,
            "violations": {
                "growth": growth.violations,
                "exhaustion": exh.violations,
                "floor": exh.floor_violations,
            },
            "growth": growth,
            "exhaustion": exh,
        }),
    );
    a.csv(
        "exhaustion.csv",
        &["R", "m", "argmin_theta"],
        exh.series.iter().map(|p| (p.r, p.m, p.argmin_theta)),
    );
    a.csv(
        "growth.csv",
        &["t", "theta", "F_q", "F_r2", "margin_from_r2", "margin_segment", "margin_angle"],
        growth
            .samples
            .iter()
            .map(|g| (g.q.0, g.q.1, g.f_q, g.f_r2, g.margin_from_r2, g.margin_segment, g.margin_angle)),
    );
    let mut plot = LinePlot::new("R", "m(R)");
    plot.series(series.clone(), true, "m(R) = min over the circle t = R of F");
    if let Some(base) = exh.series.iter().find(|p| p.r == k.r2) {
        let last = series.last().map_or(k.r2, |p| p.0);
        plot.series(
            vec![(k.r2, base.m), (last, base.m + (last - k.r2) * k.sin_lambda0)],
            false,
            format!("m(r2) + (R - r2) sin Λ0, sin Λ0 = {:.6}", k.sin_lambda0),
        );
    }
    a.svg("exhaustion.svg", plot.finish(&format!("Exhaustion series on {}", s.name())));
    Ok(a)
}

fn skipped(e: CliError) -> Result<Value, CliError> {
    if e.exit_code() == 2 {
        Ok(json!({ "skipped": e.to_string() }))
    } else {
        Err(e)
    }
}

pub fn report_all(ctx: &Context, t0: f64, delta0: f64) -> Result<Artifacts, CliError> {
    let mut all = Artifacts::new(Status::Pass);
    let mut index = Vec::new();
    for (i, s) in ctx.surfaces.iter().enumerate() {
        let dir = format!("{i}-{}", s.name());
        let mut parts = serde_json::Map::new();
        let mut add = |name: &str, r: Artifacts, all: &mut Artifacts| {
            parts.insert(name.to_string(), serde_json::to_value(&r.status).expect("status serializes"));
            all.nest(&dir, r);
        };
        add("surface", surface(ctx, i)?, &mut all);
        add("cutlocus", cutlocus(ctx, i, t0.min(0.5 * s.t_max()))?, &mut all);
        match lemmas(ctx, i) {
            Ok((r, k)) => {
                add("lemmas", r, &mut all);
                add("verify-exhaustion", verify_exhaustion(ctx, i, delta0, 0.0, Some(k))?, &mut all);
            }
            Err(e) => {
                parts.insert("lemmas".into(), skipped(e)?);
            }
        }
        index.push(json!({ "dir": dir, "surface": surface_id(s), "parts": parts }));
    }
    let mut top = serde_json::Map::new();
    if ctx.surfaces.len() == 2 {
        match verify_tct(ctx, delta0) {
            Ok(r) => {
                top.insert("verify-tct".into(), serde_json::to_value(&r.status).expect("status serializes"));
                all.nest(".", r);
            }
            Err(e) => {
                top.insert("verify-tct".into(), skipped(e)?);
            }
        }
    }
    let status = serde_json::to_value(&all.status).expect("status serializes");
    all.json(
        "report.json",
        &json!({ "config": config(ctx), "surfaces": index, "pairs": top, "status": status }),
    );
    Ok(all)
}
