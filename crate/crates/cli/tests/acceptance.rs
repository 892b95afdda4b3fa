//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riemann_core::catalog::{fixtures_de_sitter, get_entry, CatalogEntry, FixtureTag};
use riemann_core::conformal::conformal_scaling_check;
use riemann_core::curvature::{
    check_mixed_symmetries, check_symmetries, PointGeometry, RicciData,
};
use riemann_core::decomposition::{conformally_flat_lowered, is_conformally_flat, ricci_decompose};
use riemann_core::kaehler::sample_check;
use riemann_core::meigen::{
    brute_oracle, closed_form_conformally_flat, closed_form_zeta, frame_ricci, frame_tensor_at,
    meig_determination_check, meig_residual, reconstruct_from_biquadratic, restrict,
    ricci_eigenpairs, solve_meigen, to_frame, ScalarTermSign, SolverConfig,
};
use riemann_core::metric::Signature;
use riemann_core::tensor::Rank4;

type Check = std::result::Result<String, String>;

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn entry(name: &str, kv: &[(&str, f64)]) -> CatalogEntry {
    get_entry(name, &params(kv)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn contains(set: &[f64], z: f64, tol: f64) -> bool {
    set.iter().any(|w| (w - z).abs() <= tol)
}

fn de_sitter_fixtures() -> Check {
    let mut slots = 0;
    let mut corrected = 0;
    for a in [1.0, 2.0, 5.0] {
        let fx = fixtures_de_sitter(a);
        let e = entry("de_sitter_static", &[("a", a)]);
        for p in &e.probes {
            let geo = PointGeometry::compute(&e.metric, p).map_err(|e| e.to_string())?;
            ensure(rel(geo.ricci.scalar, 12.0 / (a * a)) <= 1e-8, || {
                format!("a={a} p={p:?}: R={} expected {}", geo.ricci.scalar, 12.0 / (a * a))
            })?;
            for i in 0..4 {
                for j in 0..4 {
                    let want = 3.0 / (a * a) * geo.metric[(i, j)];
                    ensure(rel(geo.ricci.lowered[(i, j)], want) <= 1e-8, || {
                        format!("a={a} p={p:?}: R_{i}{j}={} expected {want}", geo.ricci.lowered[(i, j)])
                    })?;
                }
            }
            for s in &fx.ricci {
                let want = fx.evaluate(&s.expected, p).map_err(|e| e.to_string())?;
                let got = geo.ricci.lowered[(s.index[0], s.index[1])];
                ensure(rel(got, want) <= 1e-8, || format!("Ricci slot {:?}: {got} vs {want}", s.index))?;
            }

            let k = 1.0 / (a * a);
            let g = &geo.metric;
            let delta = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
            let oracle = |[i, b, c, d]: [usize; 4]| k * (delta(i, c) * g[(b, d)] - delta(i, d) * g[(b, c)]);
            let mixed = &geo.mixed.components;
            let nonzero: Vec<[usize; 4]> = mixed
                .nonzero_entries(1e-12 * mixed.max_abs().max(1.0))
                .into_iter()
                .map(|(i, _)| i)
                .collect();
            ensure(nonzero.len() == fx.riemann.len(), || {
                format!("a={a}: {} nonzero mixed slots, fixture has {}", nonzero.len(), fx.riemann.len())
            })?;
            for s in &fx.riemann {
                let [i, b, c, d] = s.index;
                let got = mixed[(i, b, c, d)];
                ensure(nonzero.contains(&s.index), || format!("slot {:?} is zero", s.index))?;
                match s.tag {
                    FixtureTag::Published => {
                        let want = fx.evaluate(&s.expected, p).map_err(|e| e.to_string())?;
                        ensure(rel(got, want) <= 1e-8, || format!("slot {:?}: {got} vs {want}", s.index))?;
                    }
                    FixtureTag::Corrected => {
                        let want = oracle(s.index);
                        ensure(rel(got, want) <= 1e-8, || format!("slot {:?}: {got} vs oracle {want}", s.index))?;
                        corrected += 1;
                    }
                }
                slots += 1;
            }
        }
    }
    Ok(format!("{slots} Riemann slots over 15 points, {corrected} checked against the oracle"))
}

fn constant_curvature_law() -> Check {
    let mut orth = 0;
    let mut degen = 0;
    for m in 2..=5 {
        for a in [1.0, 1.7] {
            let e = entry(&format!("sphere_{m}"), &[("a", a)]);
            let (t, frame) = frame_tensor_at(&e.metric, &e.probes[0]).map_err(|e| e.to_string())?;
            let out = solve_meigen(&t, &frame.signs, &SolverConfig::default()).map_err(|e| e.to_string())?;
            let (mut saw_orth, mut saw_degen) = (false, false);
            for tr in &out.triples {
                let overlap = tr.overlap();
                if overlap < 1e-6 {
                    ensure((tr.zeta - 1.0 / (a * a)).abs() <= 1e-7, || {
                        format!("sphere_{m}(a={a}): orthogonal zeta {}", tr.zeta)
                    })?;
                    saw_orth = true;
                    orth += 1;
                } else if overlap > 1.0 - 1e-6 {
                    ensure(tr.zeta.abs() <= 1e-9, || format!("sphere_{m}(a={a}): x=y zeta {}", tr.zeta))?;
                    saw_degen = true;
                    degen += 1;
                } else {
                    return Err(format!("sphere_{m}(a={a}): unexpected triple {tr:?}"));
                }
            }
            ensure(saw_orth && saw_degen, || format!("sphere_{m}(a={a}): missing a class"))?;
        }
    }
    Ok(format!("{orth} orthogonal and {degen} degenerate classes on 8 spheres"))
}

fn sign_resolution() -> Check {
    let e = entry("sphere_4", &[("a", 1.0)]);
    let geo = PointGeometry::compute(&e.metric, &e.probes[0]).map_err(|e| e.to_string())?;
    let pairs = ricci_eigenpairs(&geo.ricci, &geo.metric, Signature::Riemannian).map_err(|e| e.to_string())?;
    let t = to_frame(&geo.lowered.components, &pairs.frame);
    let mut worst_printed_residual = f64::INFINITY;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let (l, mu, r) = (pairs.values[i], pairs.values[j], geo.ricci.scalar);
            let good = closed_form_zeta(l, mu, r, 4, ScalarTermSign::Corrected);
            let bad = closed_form_zeta(l, mu, r, 4, ScalarTermSign::AsPrinted);
            ensure((good - 1.0).abs() <= 1e-8, || format!("corrected zeta {good}"))?;
            ensure((bad - 5.0).abs() <= 1e-8, || format!("printed zeta {bad}"))?;
            let x = &pairs.frame_vectors[i];
            let y = &pairs.frame_vectors[j];
            let rg = meig_residual(&t, good, x, y);
            let rb = meig_residual(&t, bad, x, y);
            ensure(rg[0].max(rg[1]) <= 1e-8, || format!("corrected residual {rg:?}"))?;
            worst_printed_residual = worst_printed_residual.min(rb[0].max(rb[1]));
        }
    }
    ensure(worst_printed_residual > 1e-8, || format!("printed sign certified ({worst_printed_residual})"))?;
    Ok(format!("-R gives 1, +R gives 5 (residual >= {worst_printed_residual:.3})"))
}

fn closed_form_agreement() -> Check {
    let config = SolverConfig::default();
    let mut compared = 0;
    for m in 3..=5 {
        let seeds = if m == 3 { 10 } else { 5 };
        for seed in 0..seeds {
            let e = entry("conformal_flat_random", &[("m", m as f64), ("seed", seed as f64)]);
            let p = &e.probes[0];
            let geo = PointGeometry::compute(&e.metric, p).map_err(|e| e.to_string())?;
            let pairs = ricci_eigenpairs(&geo.ricci, &geo.metric, Signature::Riemannian)
                .map_err(|e| e.to_string())?;
            let t = to_frame(&geo.lowered.components, &pairs.frame);
            let closed: Vec<f64> = closed_form_conformally_flat(&pairs, geo.ricci.scalar, &t)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|tr| tr.zeta)
                .collect();
            let iterative: Vec<f64> = solve_meigen(&t, &pairs.frame.signs, &config)
                .map_err(|e| e.to_string())?
                .triples
                .iter()
                .map(|tr| tr.zeta)
                .collect();
            let tol = if m == 3 { 1e-6 } else { 1e-7 };
            for &z in &closed {
                ensure(contains(&iterative, z, tol), || {
                    format!("m={m} seed={seed}: closed {z} not in iterative {iterative:?}")
                })?;
            }
            if m == 3 {
                let oracle: Vec<f64> = brute_oracle(&t, &pairs.frame.signs, 1.0)
                    .map_err(|e| e.to_string())?
                    .iter()
                    .map(|tr| tr.zeta)
                    .collect();
                for &z in &closed {
                    ensure(contains(&oracle, z, tol), || {
                        format!("seed={seed}: closed {z} not in oracle {oracle:?}")
                    })?;
                }
                for &z in &oracle {
                    ensure(contains(&iterative, z, tol), || {
                        format!("seed={seed}: oracle {z} not in iterative {iterative:?}")
                    })?;
                }
            }
            compared += closed.len();
        }
    }
    Ok(format!("{compared} closed-form values matched (m=3 also against the oracle)"))
}

fn catalog_names() -> Vec<(String, Vec<(&'static str, f64)>)> {
    let mut out = Vec::new();
    for m in 3..=5 {
        for fam in ["euclidean", "sphere", "hyperbolic", "flat_torus"] {
            out.push((format!("{fam}_{m}"), vec![]));
        }
        out.push(("conformal_flat_random".into(), vec![("m", m as f64), ("seed", 3.0)]));
    }
    out.push(("sphere_3".into(), vec![("a", 2.5)]));
    out.push(("hyperbolic_4".into(), vec![("a", 0.7)]));
    out.push(("de_sitter_static".into(), vec![("a", 2.0)]));
    out.push(("schwarzschild".into(), vec![("M", 1.0)]));
    out.push(("product_s2xs2".into(), vec![]));
    out.push(("product_s2xs2".into(), vec![("a", 1.5), ("b", 1.5)]));
    out
}

fn decomposition() -> Check {
    let mut points = 0;
    let mut schwarzschild_ratio = f64::INFINITY;
    for (name, kv) in catalog_names() {
        let e = entry(&name, &kv);
        for p in &e.probes {
            let geo = PointGeometry::compute(&e.metric, p).map_err(|e| e.to_string())?;
            let d = ricci_decompose(&geo.lowered, &geo.metric, &geo.ricci).map_err(|e| e.to_string())?;
            let scale = geo.lowered.components.max_abs().max(1.0);
            let reassembly = d.reassembled().max_abs_diff(&geo.lowered.components) / scale;
            ensure(reassembly <= 1e-10, || format!("{name} {p:?}: reassembly {reassembly}"))?;
            let trace = d.max_weyl_trace(&geo.inverse);
            ensure(trace <= 1e-9, || format!("{name} {p:?}: Weyl trace {trace}"))?;
            let verdict = is_conformally_flat(&d, 1e-8);
            if e.metric.dim() == 3 {
                ensure(verdict.conformally_flat, || format!("{name} {p:?}: {verdict:?}"))?;
            }
            if let Some(flat) = e.facts.conformally_flat {
                ensure(verdict.conformally_flat == flat, || format!("{name} {p:?}: {verdict:?}"))?;
            }
            if name == "schwarzschild" {
                let ratio = d.norms.weyl / d.norms.riemann;
                ensure(ratio > 1e-3, || format!("Schwarzschild {p:?}: |C|/|R| = {ratio}"))?;
                let ricci = geo.ricci.lowered.norm();
                ensure(ricci <= 1e-8, || format!("Schwarzschild {p:?}: |Ric| = {ricci}"))?;
                schwarzschild_ratio = schwarzschild_ratio.min(ratio);
            }
            points += 1;
        }
    }
    Ok(format!("{points} points; Schwarzschild |C|/|R| >= {schwarzschild_ratio:.3}"))
}

fn conformal_scaling() -> Check {
    let config = SolverConfig::default();
    let mut runs = 0;
    for e in [entry("sphere_2", &[("a", 1.0)]), entry("conformal_flat_random", &[("m", 4.0)])] {
        for c in [0.5, 2.0, 3.0] {
            let p = &e.probes[0];
            let r = conformal_scaling_check(&e.metric, p, c, &config, 1e-8).map_err(|e| e.to_string())?;
            let name = e.metric.name();
            ensure(r.lowered_defect <= 1e-8, || format!("{name} c={c}: lowered {}", r.lowered_defect))?;
            ensure(r.counts_match, || format!("{name} c={c}: class counts differ"))?;
            let exp = r.fitted_exponent.ok_or_else(|| format!("{name} c={c}: no exponent"))?;
            ensure((exp + 2.0).abs() <= 1e-6, || format!("{name} c={c}: exponent {exp}"))?;
            ensure(r.eigenvector_distance <= 1e-7, || {
                format!("{name} c={c}: eigenvector distance {}", r.eigenvector_distance)
            })?;
            runs += 1;
        }
    }
    Ok(format!("{runs} rescalings: exponent -2, eigenvectors unchanged"))
}

fn kaehler() -> Check {
    let mut samples = 0;
    for n in 1..=4 {
        for c in [-1.0, 0.0, 1.0, 2.5] {
            for random_form in [false, true] {
                let r = sample_check(n, c, 100, 17 + n as u64, random_form).map_err(|e| e.to_string())?;
                let worst = r.max_residual.max(r.max_sigma_error).max(r.max_holomorphic_error);
                ensure(worst <= 1e-12, || format!("n={n} c={c} random_form={random_form}: {worst}"))?;
                samples += r.samples.len();
            }
        }
    }
    Ok(format!("{samples} unit vectors, sigma = c to 1e-12"))
}

fn random_symmetric(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    (&b + b.transpose()) * 0.5
}

fn reconstruction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let m = 3 + k % 2;
        let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let g = &b * b.transpose() + DMatrix::identity(m, m) * 0.5;
        let gi = g.clone().try_inverse().unwrap();
        let hidden = conformally_flat_lowered(&g, &random_symmetric(m, &mut rng), &gi);
        let r = reconstruct_from_biquadratic(|u, v| hidden.contract4(u, v, u, v), m).map_err(|e| e.to_string())?;
        let dev = r.max_abs_diff(&hidden);
        ensure(dev <= 1e-8, || format!("hidden tensor {k} (m={m}): deviation {dev}"))?;
        worst = worst.max(dev);
    }

    let ds = entry("de_sitter_static", &[("a", 2.0)]);
    let (t4, _) = frame_tensor_at(&ds.metric, &ds.probes[1]).map_err(|e| e.to_string())?;
    let t = restrict(&t4, &[1, 2, 3]);
    let eye = DMatrix::identity(3, 3);
    let ricci = frame_ricci(&t, &[1.0; 3]);
    let dev_ds = determination(&ricci, &eye, &t)?;

    let s3 = entry("sphere_3", &[("a", 1.0)]);
    let geo = PointGeometry::compute(&s3.metric, &s3.probes[2]).map_err(|e| e.to_string())?;
    let pairs = ricci_eigenpairs(&geo.ricci, &geo.metric, Signature::Riemannian).map_err(|e| e.to_string())?;
    let t = to_frame(&geo.lowered.components, &pairs.frame);
    let dev_s3 = meig_determination_check(&pairs, geo.ricci.scalar, &t)
        .map_err(|e| e.to_string())?
        .max_deviation;
    ensure(dev_ds <= 1e-7 && dev_s3 <= 1e-7, || format!("determination: de Sitter {dev_ds}, 3-sphere {dev_s3}"))?;
    Ok(format!("20 hidden tensors to {worst:.1e}; determination {dev_ds:.1e} / {dev_s3:.1e}"))
}

fn determination(ricci: &RicciData, g: &DMatrix<f64>, t: &Rank4) -> Result<f64, String> {
    let pairs = ricci_eigenpairs(ricci, g, Signature::Riemannian).map_err(|e| e.to_string())?;
    let t = to_frame(t, &pairs.frame);
    let report = meig_determination_check(&pairs, ricci.scalar, &t).map_err(|e| e.to_string())?;
    Ok(report.max_deviation)
}

fn identity_suite() -> Check {
    let names = catalog_names();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut tensors = 0;
    for draw in 0..50 {
        let (name, kv) = &names[rng.random_range(0..names.len())];
        let mut kv = kv.clone();
        if name == "conformal_flat_random" {
            kv.retain(|(k, _)| *k != "seed");
            kv.push(("seed", rng.random_range(0..1000) as f64));
        }
        let e = entry(name, &kv);
        let base = &e.probes[rng.random_range(0..e.probes.len())];
        let p: Vec<f64> = base.iter().map(|x| x + rng.random_range(-0.05..0.05)).collect();
        let label = format!("draw {draw} {name} {p:?}");
        let geo = PointGeometry::compute(&e.metric, &p).map_err(|e| format!("{label}: {e}"))?;
        let mut check = |what: &str, t: &Rank4| -> Result<(), String> {
            let s = check_symmetries(t);
            tensors += 1;
            ensure(s.holds(1e-9), || format!("{label}: {what} {s:?}"))
        };
        check("lowered", &geo.lowered.components)?;
        let mixed = check_mixed_symmetries(&geo.mixed.components);
        ensure(mixed <= 1e-9, || format!("{label}: mixed {mixed}"))?;
        let (t, _) = frame_tensor_at(&e.metric, &p).map_err(|e| e.to_string())?;
        check("frame", &t)?;
        let d = ricci_decompose(&geo.lowered, &geo.metric, &geo.ricci).map_err(|e| e.to_string())?;
        check("scalar part", &d.scalar_part)?;
        check("semi-traceless part", &d.semi_traceless_part)?;
        check("Weyl part", &d.weyl)?;
        let cf = conformally_flat_lowered(&geo.metric, &geo.ricci.lowered, &geo.inverse);
        check("conformally flat rebuild", &cf)?;
        let rebuilt = reconstruct_from_biquadratic(|u, v| t.contract4(u, v, u, v), t.dim())
            .map_err(|e| format!("{label}: {e}"))?;
        check("reconstruction", &rebuilt)?;
    }
    Ok(format!("{tensors} tensors from 50 draws"))
}

fn riemann(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_riemann"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn determinism() -> Check {
    let invocations: &[&[&str]] = &[
        &["report", "--metric", "sphere_3", "--point", "1,1.2,0.4"],
        &["report", "--metric", "de_sitter_static", "--param", "a=2", "--point", "0,1,1.2,0.7"],
        &["eigen", "--metric", "conformal_flat_random", "--param", "seed=4", "--point", "0.1,0,0.2,-0.3", "--seed", "9"],
        &["--pretty", "decompose", "--metric", "schwarzschild", "--point", "0,5,1,1"],
        &["conformal-check", "--metric", "sphere_2", "--point", "1,0.3", "--factor", "0.5"],
        &["kahler-check", "--n", "3", "--c", "-1", "--seed", "5", "--random-form"],
        &["reconstruct", "--dim", "4", "--seed", "12"],
        &["report", "--metric", "nowhere", "--point", "1"],
    ];
    for args in invocations {
        let first = riemann(args);
        let second = riemann(args);
        ensure(first == second, || format!("{args:?} differs between runs"))?;
        ensure(!first.1.is_empty(), || format!("{args:?} printed nothing"))?;
    }
    Ok(format!("{} invocations byte-identical", invocations.len()))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("de Sitter fixtures", de_sitter_fixtures),
        ("constant-curvature M-eigenvalue law", constant_curvature_law),
        ("scalar-term sign resolution", sign_resolution),
        ("closed form vs iterative vs oracle", closed_form_agreement),
        ("Ricci decomposition", decomposition),
        ("conformal scaling", conformal_scaling),
        ("Kaehler constant holomorphic curvature", kaehler),
        ("reconstruction and determination", reconstruction),
        ("curvature identity suite", identity_suite),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
