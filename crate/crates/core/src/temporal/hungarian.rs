use super::instance::{iou, InstanceSet};

/// Minimum-cost perfect assignment on a square cost matrix (row-major, `n x n`).
///
/// Returns `assignment[row] = column`. Shortest augmenting paths with dual
/// potentials, `O(n^3)`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Vec::new();
    }
    // 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// A matched pair of instances (by id) across `t-1` and `t+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub prev: usize,
    pub next: usize,
    pub iou: f64,
    /// `1 - IoU`.
    pub cost: f64,
}

/// Pair cost used for matching: `1 - IoU` for same-class overlapping pairs, else 1 (never accepted).
pub fn pair_cost(a: &super::Instance, b: &super::Instance) -> f64 {
    if a.class_id != b.class_id {
        return 1.0;
    }
    1.0 - iou(&a.mask, &b.mask)
}

/// One-to-one matching by class label and mask IoU.
///
/// The cost matrix is padded to square with cost 1 so every instance may stay
/// unmatched; assigned pairs that are cross-class or disjoint are dropped.
pub fn match_instances(a: &InstanceSet, b: &InstanceSet) -> Vec<Correspondence> {
    let n = a.len().max(b.len());
    let mut cost = vec![1.0; n * n];
    for (i, ia) in a.iter().enumerate() {
        for (j, ib) in b.iter().enumerate() {
            cost[i * n + j] = pair_cost(ia, ib);
        }
    }
    let assignment = hungarian(&cost, n);
    let mut out = Vec::new();
    for (i, &j) in assignment.iter().enumerate() {
        if i >= a.len() || j >= b.len() {
            continue;
        }
        let (ia, ib) = (&a.instances[i], &b.instances[j]);
        let c = cost[i * n + j];
        if ia.class_id == ib.class_id && c < 1.0 {
            out.push(Correspondence {
                prev: ia.id,
                next: ib.id,
                iou: 1.0 - c,
                cost: c,
            });
        }
    }
    out
}
