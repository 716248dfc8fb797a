use super::Detection;
use crate::imaging::BoundingBox;

/// Relative tolerance for two windows to count as the same detection.
pub const SIMILARITY_EPS: f64 = 0.2;

/// Two boxes are similar when every edge differs by at most `eps` times the
/// mean of their smaller width and smaller height.
pub fn similar(a: &BoundingBox, b: &BoundingBox, eps: f64) -> bool {
    let delta = eps * (a.w.min(b.w) + a.h.min(b.h)) * 0.5;
    (a.x - b.x).abs() <= delta
        && (a.y - b.y).abs() <= delta
        && (a.right() - b.right()).abs() <= delta
        && (a.bottom() - b.bottom()).abs() <= delta
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Class label per box: the transitive closure of [`similar`], numbered by
/// first appearance.
pub fn partition(raw: &[BoundingBox], eps: f64) -> Vec<usize> {
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if similar(&raw[i], &raw[j], eps) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

/// Merges raw windows into detections. Classes with more than `min_neighbors`
/// members emit their mean box, ordered by first member.
pub fn group(raw: &[BoundingBox], min_neighbors: usize) -> Vec<Detection> {
    let labels = partition(raw, SIMILARITY_EPS);
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut acc = vec![([0.0f64; 4], 0usize); classes];
    for (b, &l) in raw.iter().zip(&labels) {
        let (sum, count) = &mut acc[l];
        sum[0] += b.x;
        sum[1] += b.y;
        sum[2] += b.w;
        sum[3] += b.h;
        *count += 1;
    }
    acc.into_iter()
        .filter(|&(_, count)| count > min_neighbors)
        .map(|(s, count)| {
            let n = count as f64;
            Detection { bbox: BoundingBox { x: s[0] / n, y: s[1] / n, w: s[2] / n, h: s[3] / n }, support: count }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox { x, y, w, h }
    }

    #[test]
    fn single_box_passes_through() {
        let d = group(&[bx(3.0, 4.0, 20.0, 20.0)], 0);
        assert_eq!(d, vec![Detection { bbox: bx(3.0, 4.0, 20.0, 20.0), support: 1 }]);
        assert!(group(&[bx(3.0, 4.0, 20.0, 20.0)], 1).is_empty());
        assert!(group(&[], 0).is_empty());
    }

    #[test]
    fn identical_boxes_merge() {
        let d = group(&[bx(10.0, 10.0, 30.0, 30.0); 5], 3);
        assert_eq!(d, vec![Detection { bbox: bx(10.0, 10.0, 30.0, 30.0), support: 5 }]);
    }

    #[test]
    fn two_far_clusters() {
        let a = [bx(10.0, 10.0, 30.0, 30.0), bx(12.0, 11.0, 30.0, 30.0), bx(9.0, 10.0, 32.0, 31.0), bx(11.0, 12.0, 29.0, 29.0)];
        let b: Vec<_> = a.iter().map(|r| bx(r.x + 200.0, r.y + 100.0, r.w, r.h)).collect();
        let raw: Vec<_> = a.iter().chain(&b).copied().collect();
        // The partition agrees with an exhaustive pairwise check.
        let labels = partition(&raw, SIMILARITY_EPS);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(similar(&raw[i], &raw[j], SIMILARITY_EPS), labels[i] == labels[j], "{i} {j}");
            }
        }
        let d = group(&raw, 3);
        assert_eq!(d.len(), 2);
        assert_eq!(d.iter().map(|d| d.support).collect::<Vec<_>>(), vec![4, 4]);
        assert!((d[0].bbox.x - 10.5).abs() < 1e-12 && (d[1].bbox.x - 210.5).abs() < 1e-12);
    }

    #[test]
    fn similarity_boundary() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert!(similar(&a, &bx(2.0, 0.0, 10.0, 10.0), 0.2));
        assert!(!similar(&a, &bx(2.5, 0.0, 10.0, 10.0), 0.2));
        assert!(similar(&a, &bx(0.0, 0.0, 12.0, 10.0), 0.2));
    }

    #[test]
    fn chains_merge_transitively() {
        let raw = [bx(0.0, 0.0, 10.0, 10.0), bx(2.0, 0.0, 10.0, 10.0), bx(4.0, 0.0, 10.0, 10.0)];
        assert!(!similar(&raw[0], &raw[2], SIMILARITY_EPS));
        assert_eq!(partition(&raw, SIMILARITY_EPS), vec![0, 0, 0]);
    }

    fn cluster(cell: usize) -> impl Strategy<Value = Vec<BoundingBox>> {
        let (cx, cy) = ((cell % 3) as f64 * 400.0, (cell / 3) as f64 * 400.0);
        (1usize..6, 20.0f64..60.0).prop_flat_map(move |(n, size)| {
            prop::collection::vec((-0.5f64..0.5, -0.5f64..0.5, -0.5f64..0.5), n)
                .prop_map(move |jit| jit.into_iter().map(|(dx, dy, ds)| bx(cx + dx, cy + dy, size + ds, size + ds)).collect())
        })
    }

    fn separated_clusters() -> impl Strategy<Value = Vec<Vec<BoundingBox>>> {
        let cells: Vec<_> = (0..6).map(|c| prop::option::of(cluster(c))).collect();
        cells.prop_map(|cs| cs.into_iter().flatten().collect())
    }

    proptest! {
        #[test]
        fn regrouping_is_idempotent_on_separated_clusters(
            clusters in separated_clusters(), min_neighbors in 0usize..4,
        ) {
            let raw: Vec<BoundingBox> = clusters.into_iter().flatten().collect();
            let once = group(&raw, min_neighbors);
            let boxes: Vec<BoundingBox> = once.iter().map(|d| d.bbox).collect();
            let twice: Vec<BoundingBox> = group(&boxes, 0).into_iter().map(|d| d.bbox).collect();
            prop_assert_eq!(twice, boxes);
        }

        #[test]
        fn support_counts_cover_the_input(raw in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0, 5.0f64..40.0), 0..30)) {
            let raw: Vec<BoundingBox> = raw.into_iter().map(|(x, y, s)| bx(x, y, s, s)).collect();
            let total: usize = group(&raw, 0).iter().map(|d| d.support).sum();
            prop_assert_eq!(total, raw.len());
        }
    }
}
