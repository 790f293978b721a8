//! 6-connectivity component labeling.

use ndarray::Array3;

use crate::MaskVolume;

/// Label foreground components under 6-connectivity (faces only).
/// Labels run 1..=count in raster order of each component's first voxel.
pub fn connected_components(mask: &MaskVolume) -> (Array3<u32>, usize) {
    let (d, h, w) = mask.dim();
    let mut labels = Array3::<u32>::zeros((d, h, w));
    let mut count = 0u32;
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                if mask[[z, y, x]] == 0 || labels[[z, y, x]] != 0 {
                    continue;
                }
                count += 1;
                labels[[z, y, x]] = count;
                stack.push((z, y, x));
                while let Some((cz, cy, cx)) = stack.pop() {
                    let mut visit = |nz: usize, ny: usize, nx: usize| {
                        if mask[[nz, ny, nx]] != 0 && labels[[nz, ny, nx]] == 0 {
                            labels[[nz, ny, nx]] = count;
                            stack.push((nz, ny, nx));
                        }
                    };
                    if cz > 0 {
                        visit(cz - 1, cy, cx);
                    }
                    if cz + 1 < d {
                        visit(cz + 1, cy, cx);
                    }
                    if cy > 0 {
                        visit(cz, cy - 1, cx);
                    }
                    if cy + 1 < h {
                        visit(cz, cy + 1, cx);
                    }
                    if cx > 0 {
                        visit(cz, cy, cx - 1);
                    }
                    if cx + 1 < w {
                        visit(cz, cy, cx + 1);
                    }
                }
            }
        }
    }
    (labels, count as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_voxel() {
        let mut m = Array3::<u8>::zeros((3, 3, 3));
        m[[1, 1, 1]] = 1;
        let (_, n) = connected_components(&m);
        assert_eq!(n, 1);
    }

    #[test]
    fn diagonal_voxels_are_separate() {
        let mut m = Array3::<u8>::zeros((3, 3, 3));
        m[[0, 0, 0]] = 1;
        m[[0, 1, 1]] = 1;
        let (_, n) = connected_components(&m);
        assert_eq!(n, 2);
    }

    #[test]
    fn empty_mask() {
        let m = Array3::<u8>::zeros((4, 4, 4));
        let (_, n) = connected_components(&m);
        assert_eq!(n, 0);
    }

    #[test]
    fn labels_follow_raster_order() {
        let mut m = Array3::<u8>::zeros((1, 1, 5));
        m[[0, 0, 4]] = 1;
        m[[0, 0, 0]] = 1;
        let (labels, n) = connected_components(&m);
        assert_eq!(n, 2);
        assert_eq!(labels[[0, 0, 0]], 1);
        assert_eq!(labels[[0, 0, 4]], 2);
    }
}
