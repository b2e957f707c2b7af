use markersim::markers::MarkerId;
use markersim::metrics::{displacement_errors, report, shape_errors, MarkerObservation, RunTrack};
use markersim::scenario::MotionKind;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn obs(id: MarkerId, center: [f64; 2], rect: [f64; 2]) -> MarkerObservation {
    MarkerObservation {
        id,
        center,
        bounding_rect: rect,
    }
}

fn random_frame(rng: &mut ChaCha8Rng, ids: &[MarkerId]) -> Vec<MarkerObservation> {
    let mut frame: Vec<MarkerObservation> = ids
        .iter()
        .map(|&id| {
            obs(
                id,
                [rng.random_range(-50.0..250.0), rng.random_range(-50.0..250.0)],
                [rng.random_range(1.0..30.0), rng.random_range(1.0..30.0)],
            )
        })
        .collect();
    frame.shuffle(rng);
    frame
}

fn find(frame: &[MarkerObservation], id: MarkerId) -> &MarkerObservation {
    for o in frame {
        if o.id == id {
            return o;
        }
    }
    panic!("missing {id}");
}

/// Straight loops over the definitions.
fn naive_displacement(p0: &[MarkerObservation], pk: &[MarkerObservation], t0: &[MarkerObservation], tk: &[MarkerObservation]) -> (f64, f64) {
    let mut sq = 0.0;
    let mut mag = 0.0;
    for a in p0 {
        let b = find(pk, a.id);
        let c = find(t0, a.id);
        let d = find(tk, a.id);
        let dpx = b.center[0] - a.center[0];
        let dpy = b.center[1] - a.center[1];
        let dtx = d.center[0] - c.center[0];
        let dty = d.center[1] - c.center[1];
        sq += (dpx - dtx) * (dpx - dtx) + (dpy - dty) * (dpy - dty);
        mag += ((dpx * dpx + dpy * dpy).sqrt() - (dtx * dtx + dty * dty).sqrt()).abs();
    }
    let n = p0.len() as f64;
    ((sq / n).sqrt(), mag / n)
}

fn naive_shape(pred: &[MarkerObservation], truth: &[MarkerObservation]) -> (f64, f64) {
    let mut sq = 0.0;
    let mut abs = 0.0;
    for p in pred {
        let t = find(truth, p.id);
        for k in 0..2 {
            let r = p.bounding_rect[k] - t.bounding_rect[k];
            sq += r * r;
            abs += r.abs();
        }
    }
    let n = 2.0 * pred.len() as f64;
    ((sq / n).sqrt(), abs / n)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn metrics_match_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for trial in 0..1000 {
        let n = rng.random_range(1..=1000);
        let ids: Vec<MarkerId> = (0..n).map(|i| MarkerId::new(i / 40, i % 40)).collect();
        let [p0, pk, t0, tk] = [0; 4].map(|_| random_frame(&mut rng, &ids));
        let got = displacement_errors((&p0, &pk), (&t0, &tk)).unwrap();
        let want = naive_displacement(&p0, &pk, &t0, &tk);
        assert!(close(got.rmse, want.0) && close(got.mag, want.1), "trial {trial}: {got:?} vs {want:?}");
        let got = shape_errors(&pk, &tk).unwrap();
        let want = naive_shape(&pk, &tk);
        assert!(close(got.rmse, want.0) && close(got.mag, want.1), "trial {trial}: {got:?} vs {want:?}");
    }
}

#[test]
fn hand_cases() {
    let id = MarkerId::new(0, 0);
    let rest = [obs(id, [10.0, 10.0], [8.0, 8.0])];
    let moved = [obs(id, [13.0, 14.0], [8.0, 8.0])];
    let e = displacement_errors((&rest, &moved), (&rest, &rest)).unwrap();
    assert_eq!((e.rmse, e.mag), (5.0, 5.0));

    let ids = [MarkerId::new(0, 0), MarkerId::new(0, 1)];
    let t0 = [obs(ids[0], [0.0, 0.0], [1.0, 1.0]), obs(ids[1], [5.0, 0.0], [1.0, 1.0])];
    let pk = [obs(ids[0], [1.0, 0.0], [1.0, 1.0]), obs(ids[1], [5.0, 1.0], [1.0, 1.0])];
    let e = displacement_errors((&t0, &pk), (&t0, &t0)).unwrap();
    assert_eq!(e.rmse, 1.0);
    assert_eq!(e.mag, naive_displacement(&t0, &pk, &t0, &t0).1);

    let s = shape_errors(&[obs(id, [0.0; 2], [10.0, 12.0])], &[obs(id, [0.0; 2], [10.0, 10.0])]).unwrap();
    assert!((s.rmse - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(s.mag, 1.0);
}

#[test]
fn injected_noise_gives_sigma_root_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sigma = 0.7;
    let noise = Normal::new(0.0, sigma).unwrap();
    let ids: Vec<MarkerId> = (0..400).map(|i| MarkerId::new(i / 20, i % 20)).collect();
    let t0 = random_frame(&mut rng, &ids);
    let tk: Vec<MarkerObservation> = t0
        .iter()
        .map(|o| obs(o.id, [o.center[0] + 3.0, o.center[1] - 1.0], o.bounding_rect))
        .collect();
    let pk: Vec<MarkerObservation> = tk
        .iter()
        .map(|o| {
            let c = [o.center[0] + noise.sample(&mut rng), o.center[1] + noise.sample(&mut rng)];
            obs(o.id, c, o.bounding_rect)
        })
        .collect();
    let e = displacement_errors((&t0, &pk), (&t0, &tk)).unwrap();
    let expected = sigma * 2f64.sqrt();
    assert!((e.rmse - expected).abs() < 0.1 * expected, "{} vs {expected}", e.rmse);
}

#[test]
fn identical_sequences_report_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let ids: Vec<MarkerId> = (0..81).map(|i| MarkerId::new(i / 9, i % 9)).collect();
    let runs: Vec<RunTrack> = MotionKind::ALL
        .iter()
        .map(|&motion| RunTrack {
            name: motion.to_string(),
            motion,
            frames: (0..4).map(|_| random_frame(&mut rng, &ids)).collect(),
        })
        .collect();
    let r = report(&runs, &runs).unwrap();
    assert_eq!(r.per_motion.len(), 3);
    for m in r.per_motion.values().chain([&r.mean]) {
        assert_eq!([m.displacement.rmse, m.displacement.mag, m.shape.rmse, m.shape.mag], [0.0; 4]);
    }
}
