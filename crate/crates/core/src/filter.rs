//! Separable Gaussian filtering on row-major grids.

/// How samples beyond the grid edge are synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Mirror including the edge sample: `d c b a | a b c d | d c b a`.
    Reflect,
    /// Samples outside the grid are zero.
    Zero,
}

/// Radius in taps of the truncated kernel.
pub fn kernel_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil().max(1.0) as usize
}

/// Normalized Gaussian taps at offsets `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = kernel_radius(sigma) as isize;
    let denom = 2.0 * sigma * sigma;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / denom).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Maps any integer index onto `0..n` by repeated mirroring.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn padded(src: &[f64], radius: usize, boundary: Boundary, buf: &mut Vec<f64>) {
    let n = src.len();
    buf.clear();
    for i in -(radius as isize)..(n + radius) as isize {
        let v = if i >= 0 && (i as usize) < n {
            src[i as usize]
        } else {
            match boundary {
                Boundary::Reflect => src[reflect_index(i, n)],
                Boundary::Zero => 0.0,
            }
        };
        buf.push(v);
    }
}

fn blur_rows(data: &[f64], width: usize, kernel: &[f64], boundary: Boundary) -> Vec<f64> {
    let radius = kernel.len() / 2;
    let mut out = vec![0.0; data.len()];
    let mut buf = Vec::with_capacity(width + 2 * radius);
    for (src, dst) in data.chunks_exact(width).zip(out.chunks_exact_mut(width)) {
        padded(src, radius, boundary, &mut buf);
        for (x, d) in dst.iter_mut().enumerate() {
            let window = &buf[x..x + kernel.len()];
            *d = window.iter().zip(kernel).map(|(a, b)| a * b).sum();
        }
    }
    out
}

fn blur_cols(data: &[f64], width: usize, height: usize, kernel: &[f64], boundary: Boundary) -> Vec<f64> {
    let radius = kernel.len() as isize / 2;
    let mut out = vec![0.0; data.len()];
    for (y, dst) in out.chunks_exact_mut(width).enumerate() {
        for (t, &w) in kernel.iter().enumerate() {
            let yy = y as isize + t as isize - radius;
            let src_row = if yy >= 0 && (yy as usize) < height {
                yy as usize
            } else {
                match boundary {
                    Boundary::Reflect => reflect_index(yy, height),
                    Boundary::Zero => continue,
                }
            };
            let src = &data[src_row * width..(src_row + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

/// Isotropic Gaussian blur with standard deviation `sigma` (in cells).
pub fn gaussian_blur(data: &[f64], width: usize, height: usize, sigma: f64, boundary: Boundary) -> Vec<f64> {
    gaussian_blur_xy(data, width, height, sigma, sigma, boundary)
}

/// Axis-aligned Gaussian blur; a non-positive sigma leaves that axis untouched.
pub fn gaussian_blur_xy(
    data: &[f64],
    width: usize,
    height: usize,
    sigma_x: f64,
    sigma_y: f64,
    boundary: Boundary,
) -> Vec<f64> {
    assert_eq!(data.len(), width * height);
    let tmp = if sigma_x > 0.0 {
        blur_rows(data, width, &gaussian_kernel(sigma_x), boundary)
    } else {
        data.to_vec()
    };
    if sigma_y > 0.0 {
        blur_cols(&tmp, width, height, &gaussian_kernel(sigma_y), boundary)
    } else {
        tmp
    }
}
