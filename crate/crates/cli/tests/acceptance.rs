//! Acceptance checks, one printed line per criterion.
//!
//! Run with `cargo test -p markersim-cli --test acceptance`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use markersim::camera::CameraModel;
use markersim::geometry::{Mat3, Vec3};
use markersim::imaging::{fit_ellipse, label_components};
use markersim::markers::MarkerId;
use markersim::metrics::{displacement_errors, shape_errors, MarkerObservation};
use markersim::mpm::{
    compute_stress, energy_density, kernel_weights, particle_to_grid, Particle, ScatterMode, Scene, SimConfig, SimGrid,
};
use markersim::scenario::{load_scenario, run_scenario, write_fixtures, RunOptions, RunOutput, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const THROUGHPUT_BAR: f64 = 5.0;
const THROUGHPUT_CORES: usize = 8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn check(id: usize, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    });
    println!(
        "criterion {id:>2}: {} ({:.1} s) {}",
        if o.pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        o.detail
    );
    o
}

// 1: metrics against straight loops

fn find(frame: &[MarkerObservation], id: MarkerId) -> &MarkerObservation {
    frame.iter().find(|o| o.id == id).expect("id present")
}

fn naive_metrics(
    p0: &[MarkerObservation],
    pk: &[MarkerObservation],
    t0: &[MarkerObservation],
    tk: &[MarkerObservation],
) -> [f64; 4] {
    let (mut sq, mut mag, mut ssq, mut sabs) = (0.0, 0.0, 0.0, 0.0);
    for a in p0 {
        let (b, c, d) = (find(pk, a.id), find(t0, a.id), find(tk, a.id));
        let dp = [b.center[0] - a.center[0], b.center[1] - a.center[1]];
        let dt = [d.center[0] - c.center[0], d.center[1] - c.center[1]];
        sq += (dp[0] - dt[0]).powi(2) + (dp[1] - dt[1]).powi(2);
        mag += ((dp[0] * dp[0] + dp[1] * dp[1]).sqrt() - (dt[0] * dt[0] + dt[1] * dt[1]).sqrt()).abs();
        for k in 0..2 {
            let r = b.bounding_rect[k] - d.bounding_rect[k];
            ssq += r * r;
            sabs += r.abs();
        }
    }
    let n = p0.len() as f64;
    [(sq / n).sqrt(), mag / n, (ssq / (2.0 * n)).sqrt(), sabs / (2.0 * n)]
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=1000u32);
        let frame = |rng: &mut ChaCha8Rng| -> Vec<MarkerObservation> {
            let mut f: Vec<MarkerObservation> = (0..n)
                .map(|i| MarkerObservation {
                    id: MarkerId::new(i / 32, i % 32),
                    center: [rng.random_range(0.0..228.0), rng.random_range(0.0..228.0)],
                    bounding_rect: [rng.random_range(1.0..25.0), rng.random_range(1.0..25.0)],
                })
                .collect();
            f.reverse();
            f
        };
        let [p0, pk, t0, tk] = [0; 4].map(|_| frame(&mut rng));
        let d = displacement_errors((&p0, &pk), (&t0, &tk)).unwrap();
        let s = shape_errors(&pk, &tk).unwrap();
        let want = naive_metrics(&p0, &pk, &t0, &tk);
        for (got, want) in [d.rmse, d.mag, s.rmse, s.mag].iter().zip(want) {
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    let id = MarkerId::new(0, 0);
    let at = |c: [f64; 2]| {
        [MarkerObservation {
            id,
            center: c,
            bounding_rect: [8.0, 8.0],
        }]
    };
    let hand = displacement_errors((&at([5.0, 5.0]), &at([8.0, 9.0])), (&at([5.0, 5.0]), &at([5.0, 5.0]))).unwrap();
    let pass = worst <= 1e-12 && hand.rmse == 5.0 && hand.mag == 5.0;
    outcome(
        pass,
        format!("max relative deviation {worst:.2e} over 1000 sets; (3,4) case e_rmse {} e_mag {}", hand.rmse, hand.mag),
    )
}

// 2, 3: transfers

fn random_particles(rng: &mut ChaCha8Rng, grid: &SimGrid, n: usize) -> Vec<Particle> {
    let lo = grid.origin + Vec3::repeat(1.5 * grid.dx);
    let span = Vec3::from_fn(|k, _| (grid.dims[k] as f64 - 4.0) * grid.dx);
    (0..n)
        .map(|_| {
            let x = lo + span.component_mul(&Vec3::from_fn(|_, _| rng.random::<f64>()));
            let mut p = Particle::elastomer(x, rng.random_range(1e-8..1e-6), 1.25e-10);
            p.v = Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5));
            p.c = Mat3::from_fn(|_, _| rng.random_range(-100.0..100.0));
            p
        })
        .collect()
}

fn plain_config() -> SimConfig {
    SimConfig {
        elastic_forces: false,
        ..SimConfig::default()
    }
}

fn partition_and_mass() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut grid = SimGrid::new(Vec3::new(-0.012, -0.012, 0.0), 0.000625, [41, 41, 17]);
    let particles = random_particles(&mut rng, &grid, 10_000);
    let mut worst_sum: f64 = 0.0;
    for (i, p) in particles.iter().enumerate() {
        let s: f64 = kernel_weights(&p.x, &grid, i).unwrap().iter().map(|t| t.1).sum();
        worst_sum = worst_sum.max((s - 1.0).abs());
    }
    particle_to_grid(&particles, &mut grid, &plain_config()).unwrap();
    let total: f64 = particles.iter().map(|p| p.mass).sum();
    let mass_err = (grid.total_mass() - total).abs() / total;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_sum <= 1e-12 && mass_err <= 1e-9 && secs < 10.0,
        format!("max |Σw − 1| {worst_sum:.1e}, relative mass error {mass_err:.1e}, {secs:.2} s"),
    )
}

fn momentum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dims = [0; 3].map(|_| rng.random_range(6..20));
        let mut grid = SimGrid::new(Vec3::from_fn(|_, _| rng.random_range(-0.01..0.01)), rng.random_range(2e-4..2e-3), dims);
        let n = rng.random_range(1..2000);
        let particles = random_particles(&mut rng, &grid, n);
        particle_to_grid(&particles, &mut grid, &plain_config()).unwrap();
        let expected: Vec3 = particles.iter().map(|p| p.v * p.mass).sum();
        let scale: f64 = particles.iter().map(|p| (p.v * p.mass).norm()).sum();
        worst = worst.max((grid.total_momentum() - expected).norm() / scale);
    }
    outcome(worst <= 1e-9, format!("max relative momentum error {worst:.1e} over 100 scenes"))
}

// 4: uniform translation

fn neutrality() -> Outcome {
    let dx = 0.000625;
    let grid = SimGrid::new(Vec3::zeros(), dx, [30, 20, 20]);
    let velocity = Vec3::new(0.3, -0.2, 0.1);
    let spacing = 0.0005;
    let mut particles = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            for k in 0..10 {
                let x = Vec3::new(0.003, 0.004, 0.003) + Vec3::new(i as f64, j as f64, k as f64) * spacing;
                let mut p = Particle::elastomer(x, 1070.0 * spacing.powi(3), spacing.powi(3));
                p.v = velocity;
                particles.push(p);
            }
        }
    }
    let start: Vec<Vec3> = particles.iter().map(|p| p.x).collect();
    let config = SimConfig {
        dt: 2e-5,
        ..SimConfig::default()
    };
    let mut scene = Scene::new(particles, grid, config).unwrap();
    let (mut f_dev, mut x_dev): (f64, f64) = (0.0, 0.0);
    for step in 1..=100 {
        scene.step().unwrap();
        for (p, x0) in scene.particles.iter().zip(&start) {
            f_dev = f_dev.max((p.f - Mat3::identity()).abs().max());
            x_dev = x_dev.max((p.x - (x0 + velocity * (step as f64 * config.dt))).abs().max());
        }
    }
    outcome(
        f_dev < 1e-9 && x_dev < 1e-9,
        format!("max ‖F − I‖∞ {f_dev:.1e}, max position error {x_dev:.1e} m over 100 steps"),
    )
}

// 5: constitutive model

fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    let axis = nalgebra::Unit::new_normalize(Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
    *nalgebra::Rotation3::from_axis_angle(&axis, rng.random_range(-PI..PI)).matrix()
}

fn constitutive() -> Outcome {
    let m = SimConfig::default().material();
    let rest = compute_stress(&Mat3::identity(), &m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let rot = (0..100)
        .map(|_| compute_stress(&random_rotation(&mut rng), &m).unwrap().abs().max())
        .fold(0.0, f64::max);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 20 {
        let f = Mat3::identity() + Mat3::from_fn(|_, _| rng.random_range(-0.5..0.5));
        if f.determinant() <= 0.5 {
            continue;
        }
        n += 1;
        let piola = compute_stress(&f, &m).unwrap() * f.transpose().try_inverse().unwrap();
        let fd = Mat3::from_fn(|r, c| {
            let mut e = Mat3::zeros();
            e[(r, c)] = h;
            (energy_density(&(f + e), &m).unwrap() - energy_density(&(f - e), &m).unwrap()) / (2.0 * h)
        });
        worst = worst.max((fd - piola).norm() / piola.norm());
    }
    outcome(
        rest == Mat3::zeros() && rot <= 1e-9 && worst < 1e-4,
        format!("stress(I) zero: {}, max |stress(R)| {rot:.1e}, max FD relative error {worst:.1e}", rest == Mat3::zeros()),
    )
}

// 6: projection

fn projection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let cam = CameraModel::new(
            random_rotation(&mut rng),
            Vec3::from_fn(|_, _| rng.random_range(-0.05..0.05)),
            rng.random_range(50.0..1000.0),
            rng.random_range(50.0..1000.0),
            rng.random_range(0.0..300.0),
            rng.random_range(0.0..300.0),
            300,
            300,
        )
        .unwrap();
        let xc = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.01..2.0));
        let s = 10f64.powf(rng.random_range(-3.0..3.0));
        let (u0, v0) = cam.camera_to_pixel(&xc).unwrap();
        let (u1, v1) = cam.camera_to_pixel(&(xc * s)).unwrap();
        worst = worst.max((u0 - u1).abs()).max((v0 - v1).abs());
    }
    let cam = CameraModel::new(Mat3::identity(), Vec3::zeros(), 200.0, 200.0, 114.0, 114.0, 228, 228).unwrap();
    let u = cam.project(&Vec3::new(0.02, 0.0, 0.1)).u;
    outcome(
        worst <= 1e-9 && (u - 154.0).abs() <= 1e-9,
        format!("max scale deviation {worst:.1e} px; hand case u = {u}"),
    )
}

// 7: ellipse fitting

fn ellipses() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (a, b) = (rng.random_range(2.0..20.0), rng.random_range(2.0..20.0));
        let theta = rng.random_range(0.0..PI);
        let center = [rng.random_range(0.0..228.0), rng.random_range(0.0..228.0)];
        let (s, c) = theta.sin_cos();
        let points: Vec<[f64; 2]> = (0..32)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / 32.0;
                let (x, y) = (a * t.cos(), b * t.sin());
                [center[0] + x * c - y * s, center[1] + x * s + y * c]
            })
            .collect();
        let fit = fit_ellipse(&points).unwrap();
        let axes = [a.max(b), a.min(b)];
        for e in [
            fit.center[0] - center[0],
            fit.center[1] - center[1],
            fit.semi_axes[0] - axes[0],
            fit.semi_axes[1] - axes[1],
        ] {
            worst = worst.max(e.abs());
        }
    }
    outcome(worst < 1e-6, format!("max center/axis error {worst:.1e} px over 100 ellipses"))
}

// 8, 9, 11: bundled scenarios

fn scenario(dir: &Path, name: &str) -> Scenario {
    load_scenario(dir.join(format!("{name}.cfg"))).unwrap()
}

fn run_to(s: &Scenario, out: &Path) -> RunOutput {
    let options = RunOptions {
        out_dir: Some(out.to_path_buf()),
        frames: None,
        scatter: Some(ScatterMode::Deterministic),
    };
    run_scenario(s, &options).unwrap()
}

fn component_counts(run: &RunOutput) -> Vec<usize> {
    run.frames.iter().map(|f| label_components(&f.mask).0).collect()
}

fn pipeline_shape(press: &RunOutput, wide: &RunOutput) -> Outcome {
    let a = component_counts(press);
    let b = component_counts(wide);
    outcome(
        a.iter().all(|c| *c == 81) && b.iter().all(|c| *c == 63),
        format!("9x9 components per frame {a:?}; 9x7 {b:?}"),
    )
}

/// Rest and final image-space centers of the in-contact markers.
fn contact_motion(run: &RunOutput) -> Vec<([f64; 2], [f64; 2])> {
    let first = &run.frames[0].fits;
    let last = &run.frames.last().unwrap().fits;
    (0..run.ids.len())
        .filter(|&i| run.in_contact[i])
        .map(|i| (first[i].center, [last[i].center[0] - first[i].center[0], last[i].center[1] - first[i].center[1]]))
        .collect()
}

fn image_direction(s: &Scenario, from: Vec3, to: Vec3) -> [f64; 2] {
    let (a, b) = (s.camera.project(&from), s.camera.project(&to));
    [b.u - a.u, b.v - a.v]
}

fn signatures(dir: &Path, out: &Path, press: &RunOutput) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let c = press.contact_center;
    let moves = contact_motion(press);
    let radial = moves
        .iter()
        .map(|(p, d)| {
            let r = [p[0] - c[0], p[1] - c[1]];
            let n = r[0].hypot(r[1]);
            if n > 1e-9 {
                (r[0] * d[0] + r[1] * d[1]) / n
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / moves.len() as f64;
    let secs = press.manifest.timings.total_s;
    pass &= radial > 0.0 && secs <= 60.0;
    notes.push(format!("press: mean radial {radial:.3} px over {} markers in {secs:.1} s", moves.len()));

    let slip_s = scenario(dir, "slip_dotin");
    let slip = run_to(&slip_s, &out.join("slip"));
    let moves = contact_motion(&slip);
    let mean = moves.iter().fold([0.0, 0.0], |acc, (_, d)| [acc[0] + d[0], acc[1] + d[1]]);
    let surface = Vec3::new(0.0, 0.0, slip.frames[0].centroids[0].z);
    let commanded = Vec3::new(slip_s.file.trajectory.slip[0], slip_s.file.trajectory.slip[1], 0.0);
    let want = image_direction(&slip_s, surface, surface + commanded);
    let off = (mean[1].atan2(mean[0]) - want[1].atan2(want[0]) + PI).rem_euclid(2.0 * PI) - PI;
    let secs = slip.manifest.timings.total_s;
    pass &= off.abs().to_degrees() <= 10.0 && secs <= 60.0;
    notes.push(format!("slip: {:.2}° off over {} markers in {secs:.1} s", off.to_degrees(), moves.len()));

    let rot_s = scenario(dir, "rotate_hexagon");
    let rot = run_to(&rot_s, &out.join("rotate"));
    let c = rot.contact_center;
    let angle = rot_s.file.trajectory.rotate_angle;
    // commanded sense in image space: a point east of the axis turned by the commanded angle
    let axis = rot_s.camera.project(&Vec3::new(0.0, 0.0, rot.frames[0].centroids[0].z));
    let east = Vec3::new(0.001, 0.0, rot.frames[0].centroids[0].z);
    let turned = Vec3::new(0.001 * angle.cos(), 0.001 * angle.sin(), east.z);
    let (pe, pt) = (rot_s.camera.project(&east), rot_s.camera.project(&turned));
    let sense = ((pe.u - axis.u) * (pt.v - axis.v) - (pe.v - axis.v) * (pt.u - axis.u)).signum();
    let moves = contact_motion(&rot);
    let agree = moves
        .iter()
        .filter(|(p, d)| {
            let r = [p[0] - c[0], p[1] - c[1]];
            (r[0] * d[1] - r[1] * d[0]) * sense > 0.0
        })
        .count();
    let frac = agree as f64 / moves.len() as f64;
    let secs = rot.manifest.timings.total_s;
    pass &= frac >= 0.9 && secs <= 60.0;
    notes.push(format!("rotate: {agree}/{} tangential signs agree in {secs:.1} s", moves.len()));

    outcome(pass, notes.join("; "))
}

fn tree_hash(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), Sha256::digest(std::fs::read(e.path()).unwrap()).to_vec())
        })
        .collect()
}

fn determinism(dir: &Path, out: &Path) -> Outcome {
    let s = scenario(dir, "press_dotin");
    run_to(&s, &out.join("det_a"));
    run_to(&s, &out.join("det_b"));
    let (a, b) = (tree_hash(&out.join("det_a/frames")), tree_hash(&out.join("det_b/frames")));
    outcome(a == b && !a.is_empty(), format!("{} files compared, identical: {}", a.len(), a == b))
}

// 10: throughput

fn throughput(dir: &Path) -> Outcome {
    let s = scenario(dir, "throughput_48k");
    let options = RunOptions {
        out_dir: None,
        frames: Some(4),
        scatter: Some(ScatterMode::ThreadLocal),
    };
    let run = run_scenario(&s, &options).unwrap();
    let m = &run.manifest;
    outcome(
        m.sim_fps >= THROUGHPUT_BAR,
        format!(
            "{:.2} frames/s at {} particles, {} substeps/frame, {} threads (bar {THROUGHPUT_BAR} on {THROUGHPUT_CORES} cores)",
            m.sim_fps,
            m.elastomer_particles + m.indenter_particles,
            m.substeps,
            m.threads
        ),
    )
}

fn main() {
    let fixtures = tempfile::tempdir().unwrap();
    write_fixtures(fixtures.path()).unwrap();
    let dir = fixtures.path();
    let out = dir.join("runs");

    let mut results = vec![
        (1, check(1, metrics_oracle)),
        (2, check(2, partition_and_mass)),
        (3, check(3, momentum)),
        (4, check(4, neutrality)),
        (5, check(5, constitutive)),
        (6, check(6, projection)),
        (7, check(7, ellipses)),
    ];

    let press = catch_unwind(AssertUnwindSafe(|| run_to(&scenario(dir, "press_dotin"), &out.join("press")))).ok();
    let wide = catch_unwind(AssertUnwindSafe(|| run_to(&scenario(dir, "press_dotin_9x7"), &out.join("wide")))).ok();
    results.push((
        8,
        check(8, || match (&press, &wide) {
            (Some(p), Some(w)) => pipeline_shape(p, w),
            _ => outcome(false, "press run failed"),
        }),
    ));
    results.push((
        9,
        check(9, || match &press {
            Some(p) => signatures(dir, &out, p),
            None => outcome(false, "press run failed"),
        }),
    ));
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    results.push((10, check(10, || throughput(dir))));
    results.push((11, check(11, || determinism(dir, &out))));

    let failed: Vec<usize> = results
        .iter()
        .filter(|(id, o)| !o.pass && (*id != 10 || cores >= THROUGHPUT_CORES))
        .map(|(id, _)| *id)
        .collect();
    if !results[9].1.pass && cores < THROUGHPUT_CORES {
        println!("criterion 10 targets {THROUGHPUT_CORES} cores; this machine has {cores}, so it is reported but not enforced");
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
