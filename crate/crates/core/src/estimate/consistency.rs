use crate::cloud::Vec3;
use crate::correspond::CorrespondenceSet;

/// Keeps a greedy clique of pairwise length-consistent correspondences:
/// `| ‖sᵢ − sⱼ‖ − ‖tᵢ − tⱼ‖ | ≤ eps`. Growth starts at the correspondence
/// consistent with the most others and visits candidates by decreasing
/// degree, admitting each only if it agrees with every member so far.
pub fn geometric_consistency_filter(
    correspondences: &CorrespondenceSet,
    source_positions: &[Vec3],
    target_positions: &[Vec3],
    eps: f64,
) -> CorrespondenceSet {
    let n = correspondences.len();
    if n <= 1 {
        return correspondences.clone();
    }
    let s: Vec<Vec3> = correspondences.pairs.iter().map(|c| source_positions[c.source]).collect();
    let t: Vec<Vec3> = correspondences.pairs.iter().map(|c| target_positions[c.target]).collect();

    let words = n.div_ceil(64);
    let mut adjacency = vec![0u64; n * words];
    let mut degree = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if ((s[i] - s[j]).norm() - (t[i] - t[j]).norm()).abs() <= eps {
                adjacency[i * words + j / 64] |= 1 << (j % 64);
                adjacency[j * words + i / 64] |= 1 << (i % 64);
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    let connected = |i: usize, j: usize| adjacency[i * words + j / 64] & (1 << (j % 64)) != 0;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| degree[b].cmp(&degree[a]).then(a.cmp(&b)));
    let mut members = vec![order[0]];
    for &c in &order[1..] {
        if members.iter().all(|&m| connected(m, c)) {
            members.push(c);
        }
    }
    members.sort_unstable();
    correspondences.subset(&members)
}
