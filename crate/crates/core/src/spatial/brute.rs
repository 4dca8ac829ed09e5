use crate::Real3;

/// Exact O(n) scan: indices of all other points within `radius` of `points[index]`, ascending.
pub fn brute_force_neighbors(points: &[Real3], index: usize, radius: f64) -> Vec<usize> {
    let p = points[index];
    let r2 = radius * radius;
    points
        .iter()
        .enumerate()
        .filter(|&(j, q)| j != index && (q - p).norm_squared() <= r2)
        .map(|(j, _)| j)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alone_has_no_neighbors() {
        assert!(brute_force_neighbors(&[Real3::zeros()], 0, 10.0).is_empty());
    }

    #[test]
    fn symmetric() {
        let pts: Vec<Real3> = (0..30).map(|i| Real3::new((i * 7 % 11) as f64, (i * 3 % 5) as f64, (i % 4) as f64)).collect();
        for i in 0..pts.len() {
            for j in brute_force_neighbors(&pts, i, 3.0) {
                assert!(brute_force_neighbors(&pts, j, 3.0).contains(&i));
            }
        }
    }
}
