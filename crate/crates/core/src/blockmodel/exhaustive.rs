use super::assignment::Constraints;
use super::search::{tolerance, Weights};
use crate::error::{Error, Result};

/// Default ceiling on the number of canonical assignments enumerated.
pub const EXHAUSTIVE_BUDGET: u64 = 1_000_000;

/// Number of admissible assignments up to label permutation:
/// `sum over size vectors of n! / prod h_a!`, divided by `k!`.
pub fn count_admissible(n: usize, k: usize, constraints: &Constraints) -> f64 {
    let h_max = constraints.h_max_for(n);
    // labelled[m]: ways to split m labelled nodes into the groups processed so far
    let mut labelled = vec![0.0f64; n + 1];
    labelled[0] = 1.0;
    for _ in 0..k {
        let mut next = vec![0.0; n + 1];
        for m in 0..=n {
            for h in constraints.h_min..=h_max.min(m) {
                next[m] += binomial(m, h) * labelled[m - h];
            }
        }
        labelled = next;
    }
    let k_fact: f64 = (1..=k).map(|x| x as f64).product();
    labelled[n] / k_fact
}

fn binomial(m: usize, h: usize) -> f64 {
    let h = h.min(m - h);
    (0..h).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

pub(crate) struct Enumeration {
    pub labels: Vec<usize>,
    pub evaluated: u64,
    pub tied: bool,
}

/// Visits every admissible canonical labelling (restricted growth strings)
/// in lexicographic order and keeps the first maximiser of `objective`.
pub(crate) fn enumerate<W: Weights>(
    g: &W,
    k: usize,
    constraints: &Constraints,
    budget: u64,
    mut objective: impl FnMut(&W, &[usize]) -> f64,
) -> Result<Enumeration> {
    let n = g.n();
    constraints.check_feasible(n, k)?;
    let count = count_admissible(n, k, constraints);
    if !(count <= budget as f64) {
        return Err(Error::BudgetExceeded { count, budget });
    }
    let h_max = constraints.h_max_for(n);
    let eps = tolerance(n);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut tied = false;
    let mut evaluated = 0u64;
    let mut labels = vec![0; n];
    let mut sizes = vec![0; k];

    struct Ctx<'a> {
        n: usize,
        k: usize,
        h_min: usize,
        h_max: usize,
        labels: &'a mut [usize],
        sizes: &'a mut [usize],
    }

    fn recurse(ctx: &mut Ctx<'_>, i: usize, used: usize, visit: &mut dyn FnMut(&[usize])) {
        let remaining = ctx.n - i;
        let deficit: usize = ctx.sizes[..used].iter().map(|&h| ctx.h_min.saturating_sub(h)).sum::<usize>()
            + (ctx.k - used) * ctx.h_min;
        if deficit > remaining {
            return;
        }
        if i == ctx.n {
            if used == ctx.k {
                visit(ctx.labels);
            }
            return;
        }
        let top = if used < ctx.k { used + 1 } else { used };
        for l in 0..top {
            if ctx.sizes[l] == ctx.h_max {
                continue;
            }
            ctx.labels[i] = l;
            ctx.sizes[l] += 1;
            recurse(ctx, i + 1, used.max(l + 1), visit);
            ctx.sizes[l] -= 1;
        }
    }

    let mut ctx = Ctx { n, k, h_min: constraints.h_min, h_max, labels: &mut labels, sizes: &mut sizes };
    recurse(&mut ctx, 0, 0, &mut |z| {
        evaluated += 1;
        let f = objective(g, z);
        match &best {
            Some((b, _)) if f > *b + eps => {
                best = Some((f, z.to_vec()));
                tied = false;
            }
            Some((b, _)) => tied |= f >= *b - eps,
            None => best = Some((f, z.to_vec())),
        }
    });
    let (_, labels) = best.ok_or_else(|| Error::constraint("no admissible assignment"))?;
    Ok(Enumeration { labels, evaluated, tied })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmodel::search::{objective_from_scratch, AdjacencyWeights};
    use crate::sampler::AdjacencyMatrix;

    fn visit_count(n: usize, k: usize, c: Constraints) -> u64 {
        let a = AdjacencyMatrix::from_edges(n, &[]).unwrap();
        let g = AdjacencyWeights::new(&a);
        enumerate(&g, k, &c, EXHAUSTIVE_BUDGET, |g, z| objective_from_scratch(g, z, k)).unwrap().evaluated
    }

    /// Counts canonical labellings by brute force over all k^n strings.
    fn brute_count(n: usize, k: usize, c: Constraints) -> u64 {
        let mut count = 0;
        for code in 0..k.pow(n as u32) {
            let z: Vec<usize> = (0..n).map(|i| code / k.pow(i as u32) % k).collect();
            let mut sizes = vec![0; k];
            z.iter().for_each(|&l| sizes[l] += 1);
            if c.admits(&sizes, n) && crate::blockmodel::search::canonical(&z, k) == z {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(visit_count(4, 2, Constraints::fixed(2)), 3);
        assert_eq!(count_admissible(4, 2, &Constraints::fixed(2)), 3.0);
        assert_eq!(visit_count(6, 2, Constraints::default()), 25);
        assert_eq!(count_admissible(6, 2, &Constraints::default()), 25.0);
        for (n, k, c) in [(7, 2, Constraints::default()), (8, 3, Constraints::default()), (9, 3, Constraints::new(2, Some(4)))] {
            let brute = brute_count(n, k, c);
            assert_eq!(visit_count(n, k, c), brute);
            assert!((count_admissible(n, k, &c) - brute as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let a = AdjacencyMatrix::from_edges(40, &[]).unwrap();
        let g = AdjacencyWeights::new(&a);
        let err = enumerate(&g, 3, &Constraints::default(), EXHAUSTIVE_BUDGET, |_, _| 0.0).err().unwrap();
        match err {
            Error::BudgetExceeded { count, budget } => {
                assert!(count > 1e15);
                assert_eq!(budget, EXHAUSTIVE_BUDGET);
            }
            e => panic!("unexpected {e}"),
        }
    }
}
