use crate::error::{AutodiffError, Result};
use crate::real::matmul;
use crate::tape::{Accumulator, Op, Tape, Var};
use crate::{Real, Tensor};

/// Spatial padding rule for [`Tape::conv2d`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Output is `ceil(in / stride)`; odd padding goes to the bottom/right.
    Same,
    /// No padding; output is `floor((in - k) / stride) + 1`.
    Valid,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    b: usize,
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    pt: usize,
    pl: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.sh == 1 && self.sw == 1
    }

    fn ckk(&self) -> usize {
        self.c * self.kh * self.kw
    }
}

/// Output length and leading pad along one axis.
pub fn conv_output_len(input: usize, kernel: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    if stride == 0 || kernel == 0 || input == 0 {
        return None;
    }
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            Some((out, total / 2))
        }
        Padding::Valid => (input >= kernel).then(|| ((input - kernel) / stride + 1, 0)),
    }
}

fn im2col<T: Real>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let hw = g.ho * g.wo;
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * hw..(row + 1) * hw];
                for oh in 0..g.ho {
                    let ih = (oh * g.sh + ki) as isize - g.pt as isize;
                    let line = &mut dst[oh * g.wo..(oh + 1) * g.wo];
                    if ih < 0 || ih >= g.h as isize {
                        line.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[ih as usize * g.w..(ih as usize + 1) * g.w];
                    for (ow, v) in line.iter_mut().enumerate() {
                        let iw = (ow * g.sw + kj) as isize - g.pl as isize;
                        *v = if iw < 0 || iw >= g.w as isize { T::zero() } else { src[iw as usize] };
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let hw = g.ho * g.wo;
    for c in 0..g.c {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * hw..(row + 1) * hw];
                for oh in 0..g.ho {
                    let ih = (oh * g.sh + ki) as isize - g.pt as isize;
                    if ih < 0 || ih >= g.h as isize {
                        continue;
                    }
                    let line = &mut plane[ih as usize * g.w..(ih as usize + 1) * g.w];
                    for ow in 0..g.wo {
                        let iw = (ow * g.sw + kj) as isize - g.pl as isize;
                        if iw >= 0 && iw < g.w as isize {
                            line[iw as usize] += src[oh * g.wo + ow];
                        }
                    }
                }
            }
        }
    }
}

impl<T: Real> Tape<T> {
    /// 2-D cross-correlation. `weight` is `(out_c, in_c, kh, kw)`, `bias` is `(out_c)`.
    pub fn conv2d(
        &mut self,
        x: Var,
        weight: Var,
        bias: Option<Var>,
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<Var> {
        let (b, c, h, w) = self.value(x).dims4("conv2d")?;
        let (o, wc, kh, kw) = self.value(weight).dims4("conv2d")?;
        if wc != c {
            return Err(AutodiffError::Shape {
                op: "conv2d",
                detail: format!("input has {c} channels, weight expects {wc}"),
            });
        }
        if let Some(bv) = bias {
            if self.shape(bv) != [o] {
                return Err(AutodiffError::Shape {
                    op: "conv2d",
                    detail: format!("bias shape {:?}, expected [{o}]", self.shape(bv)),
                });
            }
        }
        let geometry_error = || AutodiffError::Shape {
            op: "conv2d",
            detail: format!("kernel {kh}x{kw} stride {stride:?} does not fit input {h}x{w}"),
        };
        let (ho, pt) = conv_output_len(h, kh, stride.0, padding).ok_or_else(geometry_error)?;
        let (wo, pl) = conv_output_len(w, kw, stride.1, padding).ok_or_else(geometry_error)?;
        let geom = ConvGeom { b, c, h, w, o, kh, kw, sh: stride.0, sw: stride.1, pt, pl, ho, wo };

        let xs = self.value(x).data();
        let ws = self.value(weight).data();
        let hw = ho * wo;
        let chw = c * h * w;
        let mut out = vec![T::zero(); b * o * hw];
        let mut cols = if geom.pointwise() { Vec::new() } else { vec![T::zero(); geom.ckk() * hw] };
        for bi in 0..b {
            let xb = &xs[bi * chw..(bi + 1) * chw];
            let colsref: &[T] = if geom.pointwise() {
                xb
            } else {
                im2col(xb, &geom, &mut cols);
                &cols
            };
            let ob = &mut out[bi * o * hw..(bi + 1) * o * hw];
            matmul(ws, false, colsref, false, ob, o, geom.ckk(), hw, false);
            if let Some(bv) = bias {
                let bs = self.value(bv).data();
                for (oc, plane) in ob.chunks_mut(hw).enumerate() {
                    plane.iter_mut().for_each(|v| *v += bs[oc]);
                }
            }
        }
        let mut inputs = vec![x, weight];
        inputs.extend(bias);
        let rg = self.any_grad(&inputs);
        let value = Tensor::from_vec(&[b, o, ho, wo], out)?;
        Ok(self.push(value, Op::Conv2d { x, w: weight, b: bias, geom }, rg))
    }
}

pub(crate) fn backward<T: Real>(
    tape: &Tape<T>,
    x: Var,
    w: Var,
    b: Option<Var>,
    geom: &ConvGeom,
    g: &[T],
    acc: &mut Accumulator<'_, T>,
) {
    let hw = geom.ho * geom.wo;
    let chw = geom.c * geom.h * geom.w;
    let ckk = geom.ckk();
    let xs = tape.value(x).data();
    let ws = tape.value(w).data();

    if let Some(bv) = b {
        if let Some(db) = acc.get(bv) {
            for bi in 0..geom.b {
                let gb = &g[bi * geom.o * hw..(bi + 1) * geom.o * hw];
                for (oc, plane) in gb.chunks(hw).enumerate() {
                    db[oc] += plane.iter().copied().sum::<T>();
                }
            }
        }
    }

    let mut cols = if geom.pointwise() { Vec::new() } else { vec![T::zero(); ckk * hw] };
    if let Some(dw) = acc.get(w) {
        for bi in 0..geom.b {
            let xb = &xs[bi * chw..(bi + 1) * chw];
            let colsref: &[T] = if geom.pointwise() {
                xb
            } else {
                im2col(xb, geom, &mut cols);
                &cols
            };
            let gb = &g[bi * geom.o * hw..(bi + 1) * geom.o * hw];
            matmul(gb, false, colsref, true, dw, geom.o, hw, ckk, true);
        }
    }

    if let Some(dx) = acc.get(x) {
        let mut dcols = vec![T::zero(); ckk * hw];
        for bi in 0..geom.b {
            let gb = &g[bi * geom.o * hw..(bi + 1) * geom.o * hw];
            let dxb = &mut dx[bi * chw..(bi + 1) * chw];
            if geom.pointwise() {
                matmul(ws, true, gb, false, dxb, ckk, geom.o, hw, true);
            } else {
                matmul(ws, true, gb, false, &mut dcols, ckk, geom.o, hw, false);
                col2im(&dcols, geom, dxb);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_lengths() {
        assert_eq!(conv_output_len(64, 3, 2, Padding::Same), Some((32, 0)));
        assert_eq!(conv_output_len(418, 3, 2, Padding::Same), Some((209, 0)));
        assert_eq!(conv_output_len(209, 3, 2, Padding::Same), Some((105, 1)));
        assert_eq!(conv_output_len(5, 3, 1, Padding::Same), Some((5, 1)));
        assert_eq!(conv_output_len(5, 3, 1, Padding::Valid), Some((3, 0)));
        assert_eq!(conv_output_len(2, 3, 1, Padding::Valid), None);
    }

    #[test]
    fn conv_matches_direct_loop() {
        let mut tape = Tape::<f64>::new();
        let xv: Vec<f64> = (0..2 * 2 * 5 * 6).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let wv: Vec<f64> = (0..3 * 2 * 3 * 2).map(|i| ((i * 5) % 7) as f64 * 0.25 - 0.5).collect();
        let x = tape.input(Tensor::from_vec(&[2, 2, 5, 6], xv.clone()).unwrap());
        let w = tape.input(Tensor::from_vec(&[3, 2, 3, 2], wv.clone()).unwrap());
        let y = tape.conv2d(x, w, None, (2, 1), Padding::Same).unwrap();
        assert_eq!(tape.shape(y), &[2, 3, 3, 6]);
        let (ho, wo) = (3usize, 6usize);
        // Same padding: H total pad = (3-1)*2+3-5 = 2 -> top 1; W total = 5+2-6 = 1 -> left 0.
        let (pt, pl) = (1isize, 0isize);
        let out = tape.value(y).data();
        for b in 0..2 {
            for o in 0..3 {
                for oh in 0..ho {
                    for ow in 0..wo {
                        let mut s = 0.0;
                        for c in 0..2 {
                            for ki in 0..3 {
                                for kj in 0..2 {
                                    let ih = (oh * 2 + ki) as isize - pt;
                                    let iw = (ow + kj) as isize - pl;
                                    if (0..5).contains(&ih) && (0..6).contains(&iw) {
                                        s += xv[((b * 2 + c) * 5 + ih as usize) * 6 + iw as usize]
                                            * wv[((o * 2 + c) * 3 + ki) * 2 + kj];
                                    }
                                }
                            }
                        }
                        let got = out[((b * 3 + o) * ho + oh) * wo + ow];
                        assert!((got - s).abs() < 1e-12, "{got} vs {s}");
                    }
                }
            }
        }
    }
}
