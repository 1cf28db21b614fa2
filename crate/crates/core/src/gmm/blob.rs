//! Largest 8-connected blob of a cluster's pixels and its centroid.

use std::collections::HashMap;

use nalgebra::Vector2;

use super::GmmError;
use crate::scalar::Real;

/// Default minimum blob size; smaller blobs are treated as clutter.
pub const DEFAULT_MIN_BLOB_PIXELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Centroid<T> {
    /// First-order moment centroid `(m10 / m00, m01 / m00)`.
    pub pixel: Vector2<T>,
    /// Pixels in the retained blob.
    pub blob_pixels: usize,
    /// Distinct occupied pixels before masking.
    pub occupied_pixels: usize,
    pub components: usize,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Builds the binary occupancy image of `pixels`, keeps the largest
/// 8-connected component and returns its centroid. Duplicate pixels count
/// once. Size ties keep the component containing the first pixel in
/// row-major order.
pub fn extract_centroid<T: Real>(pixels: &[(u16, u16)], min_pixels: usize) -> Result<Centroid<T>, GmmError> {
    if pixels.is_empty() {
        return Err(GmmError::EmptyCluster);
    }
    let mut occ: Vec<(u16, u16)> = pixels.iter().map(|&(x, y)| (y, x)).collect();
    occ.sort_unstable();
    occ.dedup();
    let index: HashMap<(u16, u16), usize> = occ.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut parent: Vec<usize> = (0..occ.len()).collect();
    for (i, &(y, x)) in occ.iter().enumerate() {
        // Forward half of the 8-neighbourhood is enough for union-find.
        for (dy, dx) in [(0i32, 1i32), (1, -1), (1, 0), (1, 1)] {
            let ny = y as i32 + dy;
            let nx = x as i32 + dx;
            if ny < 0 || nx < 0 || ny > u16::MAX as i32 || nx > u16::MAX as i32 {
                continue;
            }
            if let Some(&k) = index.get(&(ny as u16, nx as u16)) {
                let a = find(&mut parent, i);
                let b = find(&mut parent, k);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    let roots: Vec<usize> = (0..occ.len()).map(|i| find(&mut parent, i)).collect();
    for &r in &roots {
        *sizes.entry(r).or_default() += 1;
    }
    // Roots are minimal indices, so iterating in index order breaks ties toward
    // the earliest pixel.
    let mut best_root = roots[0];
    for &r in &roots {
        if sizes[&r] > sizes[&best_root] {
            best_root = r;
        }
    }
    let blob = sizes[&best_root];
    if blob < min_pixels {
        return Err(GmmError::SmallBlob { pixels: blob, min: min_pixels });
    }
    let (mut sx, mut sy) = (T::zero(), T::zero());
    for (i, &(y, x)) in occ.iter().enumerate() {
        if roots[i] == best_root {
            sx += T::from_count(x as usize);
            sy += T::from_count(y as usize);
        }
    }
    let m00 = T::from_count(blob);
    Ok(Centroid {
        pixel: Vector2::new(sx / m00, sy / m00),
        blob_pixels: blob,
        occupied_pixels: occ.len(),
        components: sizes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel() {
        let c = extract_centroid::<f64>(&[(100, 200)], 1).unwrap();
        assert_eq!(c.pixel, Vector2::new(100.0, 200.0));
    }

    #[test]
    fn single_pixel_is_clutter_by_default() {
        assert_eq!(
            extract_centroid::<f64>(&[(100, 200)], DEFAULT_MIN_BLOB_PIXELS),
            Err(GmmError::SmallBlob { pixels: 1, min: 3 })
        );
    }

    #[test]
    fn block_with_outlier() {
        let mut px: Vec<(u16, u16)> = Vec::new();
        for x in 49..=51 {
            for y in 59..=61 {
                px.push((x, y));
            }
        }
        px.push((400, 10));
        let c = extract_centroid::<f64>(&px, DEFAULT_MIN_BLOB_PIXELS).unwrap();
        assert_eq!(c.pixel, Vector2::new(50.0, 60.0));
        assert_eq!(c.blob_pixels, 9);
        assert_eq!(c.components, 2);
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let c = extract_centroid::<f64>(&[(0, 0), (1, 1), (2, 2), (3, 1)], 3).unwrap();
        assert_eq!(c.blob_pixels, 4);
    }

    #[test]
    fn duplicates_do_not_move_centroid() {
        let a = extract_centroid::<f64>(&[(1, 1), (2, 1), (3, 1)], 3).unwrap();
        let b = extract_centroid::<f64>(&[(1, 1), (1, 1), (1, 1), (2, 1), (3, 1)], 3).unwrap();
        assert_eq!(a.pixel, b.pixel);
    }
}
