//! Exact Euclidean distance transform (two separable passes of lower
//! envelopes of parabolas).

const FAR: f64 = 1e20;

/// 1-D squared distance transform of `f` in place.
fn transform_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    let mut first = None;
    for q in 0..n {
        if f[q] < FAR {
            first = Some(q);
            break;
        }
    }
    let Some(start) = first else {
        out.iter_mut().for_each(|o| *o = FAR);
        return;
    };
    v[0] = start;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in start + 1..n {
        if f[q] >= FAR {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        out[q] = d * d + f[p];
    }
}

/// Squared distance, in cell units, from every cell center of an
/// `nx × ny` grid to the nearest `feature` cell center. Without features
/// every entry is `≥ 1e20`.
pub fn squared_distance(nx: usize, ny: usize, feature: &[bool]) -> Vec<f64> {
    assert_eq!(feature.len(), nx * ny);
    let m = nx.max(ny);
    let mut v = vec![0usize; m];
    let mut z = vec![0.0; m + 1];
    let mut col_in = vec![0.0; ny];
    let mut col_out = vec![0.0; ny];
    let mut g = vec![FAR; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            col_in[j] = if feature[j * nx + i] { 0.0 } else { FAR };
        }
        transform_1d(&col_in, &mut col_out, &mut v, &mut z);
        for j in 0..ny {
            g[j * nx + i] = col_out[j];
        }
    }
    let mut row_out = vec![0.0; nx];
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        let row = &g[j * nx..(j + 1) * nx];
        transform_1d(row, &mut row_out, &mut v, &mut z);
        out[j * nx..(j + 1) * nx].copy_from_slice(&row_out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_brute_force() {
        let (nx, ny) = (13, 9);
        let feature: Vec<bool> = (0..nx * ny).map(|k| (k * 7919) % 23 == 0).collect();
        let d = squared_distance(nx, ny, &feature);
        for j in 0..ny {
            for i in 0..nx {
                let mut best = f64::MAX;
                for jj in 0..ny {
                    for ii in 0..nx {
                        if feature[jj * nx + ii] {
                            let dx = i as f64 - ii as f64;
                            let dy = j as f64 - jj as f64;
                            best = best.min(dx * dx + dy * dy);
                        }
                    }
                }
                assert_eq!(d[j * nx + i], best);
            }
        }
    }

    #[test]
    fn no_features_is_far() {
        let d = squared_distance(4, 3, &[false; 12]);
        assert!(d.iter().all(|&v| v >= FAR));
    }
}
