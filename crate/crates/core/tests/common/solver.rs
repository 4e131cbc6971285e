use ensemble_prune::Rng;
use nalgebra::DMatrix;
use rand::Rng as _;

/// Random binary design matrix (as mask rows) and targets in [0, 1].
pub fn random_instance(m: usize, n: usize, rng: &mut Rng) -> (Vec<Vec<bool>>, Vec<f64>) {
    let z = (0..m).map(|_| (0..n).map(|_| rng.random_bool(0.6)).collect()).collect();
    let s = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
    (z, s)
}

pub fn to_dmatrix(z: &[Vec<bool>]) -> DMatrix<f64> {
    DMatrix::from_fn(z.len(), z[0].len(), |i, j| if z[i][j] { 1.0 } else { 0.0 })
}

pub fn rank(z: &[Vec<bool>]) -> usize {
    to_dmatrix(z).rank(1e-9)
}

/// Brute-force least squares through the normal equations `ZᵀZ θ = Zᵀs`,
/// solved by Gauss-Jordan elimination with partial pivoting. Only valid for
/// full column rank.
pub fn normal_equations(z: &[Vec<bool>], s: &[f64]) -> Vec<f64> {
    let n = z[0].len();
    let x = |i: usize, j: usize| if z[i][j] { 1.0 } else { 0.0 };
    let mut a = vec![vec![0.0; n + 1]; n];
    for r in 0..n {
        for c in 0..n {
            a[r][c] = (0..z.len()).map(|i| x(i, r) * x(i, c)).sum();
        }
        a[r][n] = (0..z.len()).map(|i| x(i, r) * s[i]).sum();
    }
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, p);
        let pivot = a[col][col];
        for v in a[col].iter_mut() {
            *v /= pivot;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                let src = a[col].clone();
                for (v, s) in a[r].iter_mut().zip(&src) {
                    *v -= f * s;
                }
            }
        }
    }
    a.into_iter().map(|row| row[n]).collect()
}

/// Copy of `z` without column `c`.
pub fn drop_column(z: &[Vec<bool>], c: usize) -> Vec<Vec<bool>> {
    z.iter()
        .map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &v)| v).collect())
        .collect()
}

pub fn residual(z: &[Vec<bool>], s: &[f64], theta: &[f64]) -> f64 {
    z.iter()
        .zip(s)
        .map(|(row, &si)| {
            let pred: f64 = row.iter().zip(theta).map(|(&b, t)| if b { *t } else { 0.0 }).sum();
            (si - pred).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Largest per-coefficient gap to the normal-equations oracle over
/// `instances` random full-rank problems with M ≤ 50, N ≤ 20.
pub fn full_rank_sweep(instances: u64, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut k = 0;
    while done < instances {
        let mut rng = ensemble_prune::SeedStream::new(seed).indexed(k).rng();
        k += 1;
        let n = rng.random_range(1..=20);
        let m = rng.random_range(n..=50);
        let (z, s) = random_instance(m, n, &mut rng);
        if rank(&z) < n {
            continue;
        }
        let ours = ensemble_prune::importance::solve_importance(&z, &s).unwrap().theta;
        let oracle = normal_equations(&z, &s);
        for (a, b) in ours.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
        done += 1;
    }
    worst
}

/// Largest residual-norm gap to an independent oracle over `instances`
/// random rank-deficient problems, cycling through three constructions:
///
/// * column `b` duplicates column `a`: the minimum residual is that of the
///   full-rank problem without column `b`;
/// * column `a` is all zeros: likewise without column `a`;
/// * fewer rows than columns with full row rank: the minimum residual is 0.
pub fn rank_deficient_sweep(instances: u64, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut k = 0;
    while done < instances {
        let mut rng = ensemble_prune::SeedStream::new(seed).named("deficient").indexed(k).rng();
        let case = k % 3;
        k += 1;
        let n = rng.random_range(2..=20);
        let m = if case == 2 { rng.random_range(1..n) } else { rng.random_range(n..=50) };
        let (mut z, s) = random_instance(m, n, &mut rng);
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        let best = match case {
            0 | 1 => {
                let dropped = if case == 0 {
                    z.iter_mut().for_each(|row| row[b] = row[a]);
                    b
                } else {
                    z.iter_mut().for_each(|row| row[a] = false);
                    a
                };
                let reduced = drop_column(&z, dropped);
                if rank(&reduced) < n - 1 {
                    continue;
                }
                residual(&reduced, &s, &normal_equations(&reduced, &s))
            }
            _ => {
                if rank(&z) < m {
                    continue;
                }
                0.0
            }
        };
        let ours = ensemble_prune::importance::solve_importance(&z, &s).unwrap().theta;
        worst = worst.max((residual(&z, &s, &ours) - best).abs());
        done += 1;
    }
    worst
}
