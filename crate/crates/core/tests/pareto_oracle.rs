use monas::pareto::{front_of, ParetoPoint};
use monas::space::{Architecture, CondenseNetArch};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arch(k: usize) -> Architecture {
    let stages = [6, 8, 10, 12, 14];
    Architecture::CondenseNet(CondenseNetArch {
        stages: [stages[k % 5], stages[(k / 5) % 5], 6],
        growths: [4, 8, 16],
    })
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, grid: Option<u32>) -> Vec<ParetoPoint> {
    (0..n)
        .map(|i| {
            let (accuracy, energy) = match grid {
                Some(g) => (
                    rng.random_range(0..g) as f64 / g as f64,
                    rng.random_range(0..g) as f64 * 10.0,
                ),
                None => (rng.random::<f64>(), rng.random::<f64>() * 100.0),
            };
            ParetoPoint {
                accuracy,
                energy,
                arch: arch(rng.random_range(0..25)),
                iteration: i + 1,
            }
        })
        .collect()
}

/// Straight O(n²) filter: keep points no other point dominates, and among
/// points with identical objectives keep the earliest.
fn brute_force(points: &[ParetoPoint]) -> Vec<(f64, f64, usize)> {
    let dominated = |p: &ParetoPoint, q: &ParetoPoint| {
        q.accuracy >= p.accuracy
            && q.energy <= p.energy
            && (q.accuracy > p.accuracy || q.energy < p.energy)
    };
    let mut keep: Vec<&ParetoPoint> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominated(p, q)))
        .filter(|p| {
            !points.iter().any(|q| {
                q.accuracy == p.accuracy
                    && q.energy == p.energy
                    && (q.iteration, q.arch.to_compact()) < (p.iteration, p.arch.to_compact())
            })
        })
        .collect();
    keep.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    keep.iter()
        .map(|p| (p.accuracy, p.energy, p.iteration))
        .collect()
}

fn check(points: Vec<ParetoPoint>, rng: &mut ChaCha8Rng) {
    let expected = brute_force(&points);
    let mut order = points;
    for _ in 0..10 {
        order.shuffle(rng);
        let got: Vec<_> = front_of(order.iter().cloned())
            .points()
            .iter()
            .map(|p| (p.accuracy, p.energy, p.iteration))
            .collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn continuous_points_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..3 {
        let pts = random_points(&mut rng, 1000, None);
        check(pts, &mut rng);
    }
}

#[test]
fn tied_points_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    for grid in [3, 10, 40] {
        let pts = random_points(&mut rng, 1000, Some(grid));
        check(pts, &mut rng);
    }
}

#[test]
fn front_is_sorted_and_mutually_non_dominated() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let front = front_of(random_points(&mut rng, 1000, Some(25)));
    for w in front.points().windows(2) {
        assert!(w[0].energy < w[1].energy);
        assert!(w[0].accuracy < w[1].accuracy);
    }
}
