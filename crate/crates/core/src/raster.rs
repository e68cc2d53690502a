//! Connected-component labeling on binary rasters.

/// Labels the `true` cells of a row-major `nx × ny` mask with 4-connectivity.
///
/// Returns per-cell labels (0 = background, components numbered from 1 in
/// scan order) and the component count. Deterministic for a given mask.
pub fn label_components(mask: &[bool], nx: usize, ny: usize) -> (Vec<u32>, usize) {
    assert_eq!(mask.len(), nx * ny, "mask length must be nx*ny");
    let mut labels = vec![0u32; mask.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let x = idx % nx;
            let y = idx / nx;
            let mut visit = |nidx: usize| {
                if mask[nidx] && labels[nidx] == 0 {
                    labels[nidx] = next;
                    stack.push(nidx);
                }
            };
            if x > 0 {
                visit(idx - 1);
            }
            if x + 1 < nx {
                visit(idx + 1);
            }
            if y > 0 {
                visit(idx - nx);
            }
            if y + 1 < ny {
                visit(idx + nx);
            }
        }
    }
    (labels, next as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_full() {
        let (l, n) = label_components(&[false; 12], 4, 3);
        assert_eq!(n, 0);
        assert!(l.iter().all(|&v| v == 0));
        let (l, n) = label_components(&[true; 12], 4, 3);
        assert_eq!(n, 1);
        assert!(l.iter().all(|&v| v == 1));
    }

    #[test]
    fn diagonal_cells_are_separate_under_4_connectivity() {
        // x.
        // .x
        let mask = [true, false, false, true];
        let (_, n) = label_components(&mask, 2, 2);
        assert_eq!(n, 2);
    }

    #[test]
    fn two_blobs() {
        let nx = 6;
        let ny = 5;
        let mut mask = vec![false; nx * ny];
        for y in 0..2 {
            for x in 0..2 {
                mask[y * nx + x] = true;
            }
        }
        for y in 3..5 {
            for x in 4..6 {
                mask[y * nx + x] = true;
            }
        }
        let (labels, n) = label_components(&mask, nx, ny);
        assert_eq!(n, 2);
        assert_ne!(labels[0], labels[4 * nx + 5]);
        assert_ne!(labels[0], 0);
    }
}
