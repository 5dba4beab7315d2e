use crate::error::{shape_err, Result};
use crate::shape::LayerSpec;
use crate::tensor::{Matrix, Tensor3};

/// Unrolls a `c_in × H × W` input into the `A × cols` im2col matrix.
///
/// Row `(ky·k_w + kx)·c_in + c` of column `j` holds input channel `c` at
/// kernel tap `(ky, kx)` of output position `j`; out-of-bounds taps read 0.
/// Only ungrouped layers have a single unrolled matrix; see
/// [`unroll_im2col_grouped`] for the general case.
pub fn unroll_im2col(input: &Tensor3, layer: &LayerSpec) -> Result<Matrix> {
    if layer.groups != 1 {
        return shape_err(format!(
            "layer '{}' has {} groups; unroll per group instead",
            layer.name, layer.groups
        ));
    }
    let mut parts = unroll_im2col_grouped(input, layer)?;
    Ok(parts.remove(0))
}

/// One im2col matrix per group, each `k_h·k_w·c_in/g × cols`.
pub fn unroll_im2col_grouped(input: &Tensor3, layer: &LayerSpec) -> Result<Vec<Matrix>> {
    layer.validate()?;
    if (input.channels(), input.height(), input.width()) != (layer.c_in, layer.in_h, layer.in_w) {
        return shape_err(format!(
            "layer '{}' expects input {}x{}x{}, got {}x{}x{}",
            layer.name,
            layer.c_in,
            layer.in_h,
            layer.in_w,
            input.channels(),
            input.height(),
            input.width()
        ));
    }
    let (out_h, out_w) = (layer.out_h(), layer.out_w());
    let (pad_t, pad_l) = layer.pad_top_left();
    let cg = layer.c_in / layer.groups;
    let rows = layer.unrolled_rows();
    let cols = out_h * out_w;

    let mut parts = Vec::with_capacity(layer.groups);
    for g in 0..layer.groups {
        let mut m = Matrix::zeros(rows, cols);
        let data = m.as_mut_slice();
        for oy in 0..out_h {
            for ox in 0..out_w {
                let j = oy * out_w + ox;
                for ky in 0..layer.k_h {
                    let iy = (oy * layer.stride + ky) as isize - pad_t as isize;
                    if iy < 0 || iy >= layer.in_h as isize {
                        continue;
                    }
                    for kx in 0..layer.k_w {
                        let ix = (ox * layer.stride + kx) as isize - pad_l as isize;
                        if ix < 0 || ix >= layer.in_w as isize {
                            continue;
                        }
                        let base = (ky * layer.k_w + kx) * cg;
                        for c in 0..cg {
                            data[(base + c) * cols + j] =
                                input.get(g * cg + c, iy as usize, ix as usize);
                        }
                    }
                }
            }
        }
        parts.push(m);
    }
    Ok(parts)
}

/// Reorders a `[c_out][c_in/g][k_h][k_w]` weight tensor into the
/// `c_out × A` layout matching [`unroll_im2col`] rows.
pub fn unroll_weights(oihw: &[f64], layer: &LayerSpec) -> Result<Matrix> {
    layer.validate()?;
    let cg = layer.c_in / layer.groups;
    let a = layer.unrolled_rows();
    if oihw.len() != layer.c_out * a {
        return shape_err(format!(
            "layer '{}' expects {} weights, got {}",
            layer.name,
            layer.c_out * a,
            oihw.len()
        ));
    }
    let mut w = Matrix::zeros(layer.c_out, a);
    for o in 0..layer.c_out {
        for c in 0..cg {
            for ky in 0..layer.k_h {
                for kx in 0..layer.k_w {
                    let src = ((o * cg + c) * layer.k_h + ky) * layer.k_w + kx;
                    w.set(o, (ky * layer.k_w + kx) * cg + c, oihw[src]);
                }
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_is_reshape() {
        let data: Vec<f64> = (0..3 * 2 * 2).map(|v| v as f64).collect();
        let t = Tensor3::new(3, 2, 2, data.clone()).unwrap();
        let l = LayerSpec::pointwise("pw", 3, 5, 2, 2);
        let m = unroll_im2col(&t, &l).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 4));
        assert_eq!(m.as_slice(), &data[..]);
    }

    #[test]
    fn border_taps_counted() {
        // 3x3 kernel on a 2x2 all-ones image: each output sees 4 in-bounds taps.
        let t = Tensor3::new(1, 2, 2, vec![1.0; 4]).unwrap();
        let l = LayerSpec::conv("c", 1, 1, 3, 1, 2, 2);
        let m = unroll_im2col(&t, &l).unwrap();
        assert_eq!((m.rows(), m.cols()), (9, 4));
        for j in 0..4 {
            let s: f64 = m.column(j).iter().sum();
            assert_eq!(s, 4.0);
        }
        // top-left output: taps (1,1),(1,2),(2,1),(2,2) are in bounds
        let col0 = m.column(0);
        let ones: Vec<usize> = (0..9).filter(|&r| col0[r] == 1.0).collect();
        assert_eq!(ones, vec![4, 5, 7, 8]);
    }

    #[test]
    fn resnet_block2_conv2_shape() {
        let t = Tensor3::zeros(32, 16, 16);
        let l = LayerSpec::conv("Block2-Conv2", 32, 32, 3, 1, 16, 16);
        let m = unroll_im2col(&t, &l).unwrap();
        assert_eq!((m.rows(), m.cols()), (288, 256));
    }

    #[test]
    fn mismatched_input_rejected() {
        let t = Tensor3::zeros(3, 8, 8);
        let l = LayerSpec::conv("c", 4, 4, 3, 1, 8, 8);
        assert!(unroll_im2col(&t, &l).is_err());
        let dw = LayerSpec::depthwise("dw", 3, 3, 1, 8, 8);
        assert!(unroll_im2col(&t, &dw).is_err());
        assert_eq!(unroll_im2col_grouped(&t, &dw).unwrap().len(), 3);
    }

    #[test]
    fn im2col_matches_direct_convolution() {
        let (c_in, c_out, k, h, w) = (2, 3, 3, 5, 4);
        let input: Vec<f64> = (0..c_in * h * w).map(|v| ((v * 7) % 11) as f64 - 5.0).collect();
        let t = Tensor3::new(c_in, h, w, input).unwrap();
        let oihw: Vec<f64> = (0..c_out * c_in * k * k).map(|v| ((v * 5) % 13) as f64 - 6.0).collect();
        for stride in 1..=2 {
            let l = LayerSpec::conv("c", c_in, c_out, k, stride, h, w);
            let x = unroll_im2col(&t, &l).unwrap();
            let wm = unroll_weights(&oihw, &l).unwrap();
            let (pt, pl) = l.pad_top_left();
            for o in 0..c_out {
                for oy in 0..l.out_h() {
                    for ox in 0..l.out_w() {
                        let mut direct = 0.0;
                        for c in 0..c_in {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * stride + ky) as isize - pt as isize;
                                    let ix = (ox * stride + kx) as isize - pl as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                        direct += oihw[((o * c_in + c) * k + ky) * k + kx]
                                            * t.get(c, iy as usize, ix as usize);
                                    }
                                }
                            }
                        }
                        let j = oy * l.out_w() + ox;
                        let via: f64 = (0..x.rows()).map(|r| wm.get(o, r) * x.get(r, j)).sum();
                        assert!((direct - via).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
