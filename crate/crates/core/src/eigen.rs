//! Dense Hermitian eigenvalues: Householder tridiagonalization fused with
//! the symmetric matrix-vector product (one pass over the trailing block
//! per reflector), followed by implicit QL on the tridiagonal.
//!
//! Matrices are column-major with only the lower triangle referenced.

use crate::error::{LabError, Result};
use wide::f64x4;

const QL_MAX_SWEEPS: usize = 60;

#[inline(always)]
fn ld(s: &[f64], i: usize) -> f64x4 {
    f64x4::new(s[i..i + 4].try_into().unwrap())
}

#[inline(always)]
fn st(s: &mut [f64], i: usize, v: f64x4) {
    s[i..i + 4].copy_from_slice(&v.to_array());
}

#[inline(always)]
fn hsum(a: [f64; 4]) -> f64 {
    (a[0] + a[1]) + (a[2] + a[3])
}

fn avx2_available() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::arch::is_x86_feature_detected!("avx2")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn fused_real_dispatch(avx: bool, col: &mut [f64], vo: &[f64], wo: &[f64], vn: &[f64], pn: &mut [f64], voj: f64, woj: f64, vnj: f64) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if avx {
        // SAFETY: `avx` is only set after runtime detection of AVX2.
        return unsafe { avx::fused_real(col, vo, wo, vn, pn, voj, woj, vnj) };
    }
    let _ = avx;
    fused_real(col, vo, wo, vn, pn, voj, woj, vnj)
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn fused_cplx_dispatch(
    avx: bool,
    cr: &mut [f64],
    ci: &mut [f64],
    vo: (&[f64], &[f64]),
    wo: (&[f64], &[f64]),
    vn: (&[f64], &[f64]),
    p: (&mut [f64], &mut [f64]),
    cw: (f64, f64),
    cv: (f64, f64),
    vj: (f64, f64),
) -> (f64, f64) {
    #[cfg(target_arch = "x86_64")]
    if avx {
        // SAFETY: as above.
        return unsafe { avx::fused_cplx(cr, ci, vo, wo, vn, p, cw, cv, vj) };
    }
    let _ = avx;
    fused_cplx(cr, ci, vo, wo, vn, p, cw, cv, vj)
}

/// 256-bit versions of the fused kernels. Every lane performs the same
/// operations in the same order as the portable kernels (no FMA), so both
/// paths produce bit-identical results.
#[cfg(target_arch = "x86_64")]
mod avx {
    use super::hsum;
    use std::arch::x86_64::*;


    #[inline]
    #[target_feature(enable = "avx2")]
    unsafe fn ld(s: &[f64], i: usize) -> __m256d {
        _mm256_loadu_pd(s[i..i + 4].as_ptr())
    }

    #[inline]
    #[target_feature(enable = "avx2")]
    unsafe fn st(s: &mut [f64], i: usize, v: __m256d) {
        _mm256_storeu_pd(s[i..i + 4].as_mut_ptr(), v)
    }

    #[inline]
    #[target_feature(enable = "avx2")]
    unsafe fn lanes(v: __m256d) -> [f64; 4] {
        let mut a = [0.0; 4];
        _mm256_storeu_pd(a.as_mut_ptr(), v);
        a
    }

    #[allow(clippy::too_many_arguments)]
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn fused_real(col: &mut [f64], vo: &[f64], wo: &[f64], vn: &[f64], pn: &mut [f64], voj: f64, woj: f64, vnj: f64) -> f64 {
        let n = col.len();
        let (vo, wo, vn, pn) = (&vo[..n], &wo[..n], &vn[..n], &mut pn[..n]);
        let m = n / 4 * 4;
        let (wj, vj, nj) = (_mm256_set1_pd(woj), _mm256_set1_pd(voj), _mm256_set1_pd(vnj));
        let mut acc = _mm256_setzero_pd();
        for i in (0..m).step_by(4) {
            let a = _mm256_sub_pd(_mm256_sub_pd(ld(col, i), _mm256_mul_pd(ld(vo, i), wj)), _mm256_mul_pd(ld(wo, i), vj));
            st(col, i, a);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(a, ld(vn, i)));
            st(pn, i, _mm256_add_pd(ld(pn, i), _mm256_mul_pd(a, nj)));
        }
        let mut s = hsum(lanes(acc));
        for q in m..n {
            let a = col[q] - vo[q] * woj - wo[q] * voj;
            col[q] = a;
            s += a * vn[q];
            pn[q] += a * vnj;
        }
        s
    }

    #[allow(clippy::too_many_arguments)]
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn fused_cplx(
        cr: &mut [f64],
        ci: &mut [f64],
        vo: (&[f64], &[f64]),
        wo: (&[f64], &[f64]),
        vn: (&[f64], &[f64]),
        p: (&mut [f64], &mut [f64]),
        cw: (f64, f64),
        cv: (f64, f64),
        vj: (f64, f64),
    ) -> (f64, f64) {
        let n = cr.len();
        let ci = &mut ci[..n];
        let (vor, voi) = (&vo.0[..n], &vo.1[..n]);
        let (wor, woi) = (&wo.0[..n], &wo.1[..n]);
        let (vnr, vni) = (&vn.0[..n], &vn.1[..n]);
        let (pr, pi) = (&mut p.0[..n], &mut p.1[..n]);
        let m = n / 4 * 4;
        let (cw0, cw1, cv0, cv1) = (_mm256_set1_pd(cw.0), _mm256_set1_pd(cw.1), _mm256_set1_pd(cv.0), _mm256_set1_pd(cv.1));
        let (vj0, vj1) = (_mm256_set1_pd(vj.0), _mm256_set1_pd(vj.1));
        let mut accr = _mm256_setzero_pd();
        let mut acci = _mm256_setzero_pd();
        for i in (0..m).step_by(4) {
            let (vr, vi, wr, wi) = (ld(vor, i), ld(voi, i), ld(wor, i), ld(woi, i));
            // ((vr·cw0 − vi·cw1) + wr·cv0) − wi·cv1
            let ur = _mm256_sub_pd(_mm256_add_pd(_mm256_sub_pd(_mm256_mul_pd(vr, cw0), _mm256_mul_pd(vi, cw1)), _mm256_mul_pd(wr, cv0)), _mm256_mul_pd(wi, cv1));
            let ui = _mm256_add_pd(_mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(vr, cw1), _mm256_mul_pd(vi, cw0)), _mm256_mul_pd(wr, cv1)), _mm256_mul_pd(wi, cv0));
            let ar = _mm256_sub_pd(ld(cr, i), ur);
            let ai = _mm256_sub_pd(ld(ci, i), ui);
            st(cr, i, ar);
            st(ci, i, ai);
            let (nr, ni) = (ld(vnr, i), ld(vni, i));
            accr = _mm256_add_pd(accr, _mm256_add_pd(_mm256_mul_pd(ar, nr), _mm256_mul_pd(ai, ni)));
            acci = _mm256_add_pd(acci, _mm256_sub_pd(_mm256_mul_pd(ar, ni), _mm256_mul_pd(ai, nr)));
            st(pr, i, _mm256_add_pd(ld(pr, i), _mm256_sub_pd(_mm256_mul_pd(ar, vj0), _mm256_mul_pd(ai, vj1))));
            st(pi, i, _mm256_add_pd(ld(pi, i), _mm256_add_pd(_mm256_mul_pd(ar, vj1), _mm256_mul_pd(ai, vj0))));
        }
        let (mut sr, mut si) = (0.0, 0.0);
        for q in m..n {
            let ar = cr[q] - (vor[q] * cw.0 - voi[q] * cw.1 + wor[q] * cv.0 - woi[q] * cv.1);
            let ai = ci[q] - (vor[q] * cw.1 + voi[q] * cw.0 + wor[q] * cv.1 + woi[q] * cv.0);
            cr[q] = ar;
            ci[q] = ai;
            sr += ar * vnr[q] + ai * vni[q];
            si += ar * vni[q] - ai * vnr[q];
            pr[q] += ar * vj.0 - ai * vj.1;
            pi[q] += ar * vj.1 + ai * vj.0;
        }
        sr += hsum(lanes(accr));
        si += hsum(lanes(acci));
        (sr, si)
    }
}

/// Applies the rank-2 update of the previous reflector to one column slice,
/// returns the dot product of the updated slice with `vn` and accumulates
/// the symmetric counterpart into `pn`.
#[inline]
#[allow(clippy::too_many_arguments)]
fn fused_real(col: &mut [f64], vo: &[f64], wo: &[f64], vn: &[f64], pn: &mut [f64], voj: f64, woj: f64, vnj: f64) -> f64 {
    let n = col.len();
    let (vo, wo, vn, pn) = (&vo[..n], &wo[..n], &vn[..n], &mut pn[..n]);
    let m = n / 4 * 4;
    let (wj, vj, nj) = (f64x4::splat(woj), f64x4::splat(voj), f64x4::splat(vnj));
    let mut acc = f64x4::ZERO;
    for i in (0..m).step_by(4) {
        let a = ld(col, i) - ld(vo, i) * wj - ld(wo, i) * vj;
        st(col, i, a);
        acc += a * ld(vn, i);
        st(pn, i, ld(pn, i) + a * nj);
    }
    let mut s = hsum(acc.to_array());
    for q in m..n {
        let a = col[q] - vo[q] * woj - wo[q] * voj;
        col[q] = a;
        s += a * vn[q];
        pn[q] += a * vnj;
    }
    s
}

/// Reduces a real symmetric matrix (lower triangle, column-major) to
/// tridiagonal form; returns (diagonal, subdiagonal, τ). On exit column k
/// holds the reflector tail v[k+2..] (v[k+1] = 1 implied), so that
/// A = Q T Qᵀ with Q = H₀H₁⋯, H_k = I − τ_k v vᵀ.
pub fn tridiagonalize_real(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let avx = avx2_available();
    let mut taus = vec![0.0; n.saturating_sub(1)];
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut vo = vec![0.0; n];
    let mut wo = vec![0.0; n];
    let mut vn = vec![0.0; n];
    let mut pn = vec![0.0; n];
    for k in 0..n {
        {
            let col = &mut a[k * n..(k + 1) * n];
            let (vk, wk) = (vo[k], wo[k]);
            if vk != 0.0 || wk != 0.0 {
                for i in k..n {
                    col[i] -= vo[i] * wk + wo[i] * vk;
                }
            }
            d[k] = col[k];
        }
        if k + 1 >= n {
            break;
        }
        let col = &a[k * n..(k + 1) * n];
        let alpha = col[k + 1];
        let sigma: f64 = col[k + 2..].iter().map(|x| x * x).sum();
        vn.iter_mut().for_each(|v| *v = 0.0);
        let tau = if sigma == 0.0 {
            e[k] = alpha;
            0.0
        } else {
            let norm = (alpha * alpha + sigma).sqrt();
            let beta = if alpha >= 0.0 { -norm } else { norm };
            let scale = 1.0 / (alpha - beta);
            vn[k + 1] = 1.0;
            for i in k + 2..n {
                vn[i] = col[i] * scale;
            }
            e[k] = beta;
            (beta - alpha) / beta
        };
        taus[k] = tau;
        a[k * n + k + 1..(k + 1) * n].copy_from_slice(&vn[k + 1..]);
        pn.iter_mut().for_each(|p| *p = 0.0);
        for j in k + 1..n {
            let col = &mut a[j * n..(j + 1) * n];
            let (voj, woj, vnj) = (vo[j], wo[j], vn[j]);
            let ajj = col[j] - 2.0 * voj * woj;
            col[j] = ajj;
            let mut s = ajj * vnj;
            if j + 1 < n {
                s += fused_real_dispatch(avx, &mut col[j + 1..], &vo[j + 1..], &wo[j + 1..], &vn[j + 1..], &mut pn[j + 1..], voj, woj, vnj);
            }
            pn[j] += s;
        }
        // w = τAv − ½τ²(vᵀAv)v, so that A − vwᵀ − wvᵀ is the reflected block.
        let mut pv = 0.0;
        for i in k + 1..n {
            pn[i] *= tau;
            pv += pn[i] * vn[i];
        }
        let c = -0.5 * tau * pv;
        for i in 0..n {
            wo[i] = if i > k && tau != 0.0 { pn[i] + c * vn[i] } else { 0.0 };
            vo[i] = if tau != 0.0 { vn[i] } else { 0.0 };
        }
    }
    (d, e, taus)
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn fused_cplx(
    cr: &mut [f64],
    ci: &mut [f64],
    vo: (&[f64], &[f64]),
    wo: (&[f64], &[f64]),
    vn: (&[f64], &[f64]),
    p: (&mut [f64], &mut [f64]),
    cw: (f64, f64),
    cv: (f64, f64),
    vj: (f64, f64),
) -> (f64, f64) {
    let n = cr.len();
    let ci = &mut ci[..n];
    let (vor, voi) = (&vo.0[..n], &vo.1[..n]);
    let (wor, woi) = (&wo.0[..n], &wo.1[..n]);
    let (vnr, vni) = (&vn.0[..n], &vn.1[..n]);
    let (pr, pi) = (&mut p.0[..n], &mut p.1[..n]);
    let m = n / 4 * 4;
    let (cw0, cw1, cv0, cv1) = (f64x4::splat(cw.0), f64x4::splat(cw.1), f64x4::splat(cv.0), f64x4::splat(cv.1));
    let (vj0, vj1) = (f64x4::splat(vj.0), f64x4::splat(vj.1));
    let mut accr = f64x4::ZERO;
    let mut acci = f64x4::ZERO;
    for i in (0..m).step_by(4) {
        let (vr, vi, wr, wi) = (ld(vor, i), ld(voi, i), ld(wor, i), ld(woi, i));
        let ar = ld(cr, i) - (vr * cw0 - vi * cw1 + wr * cv0 - wi * cv1);
        let ai = ld(ci, i) - (vr * cw1 + vi * cw0 + wr * cv1 + wi * cv0);
        st(cr, i, ar);
        st(ci, i, ai);
        let (nr, ni) = (ld(vnr, i), ld(vni, i));
        accr += ar * nr + ai * ni;
        acci += ar * ni - ai * nr;
        st(pr, i, ld(pr, i) + (ar * vj0 - ai * vj1));
        st(pi, i, ld(pi, i) + (ar * vj1 + ai * vj0));
    }
    let (mut sr, mut si) = (0.0, 0.0);
    for q in m..n {
        let ar = cr[q] - (vor[q] * cw.0 - voi[q] * cw.1 + wor[q] * cv.0 - woi[q] * cv.1);
        let ai = ci[q] - (vor[q] * cw.1 + voi[q] * cw.0 + wor[q] * cv.1 + woi[q] * cv.0);
        cr[q] = ar;
        ci[q] = ai;
        sr += ar * vnr[q] + ai * vni[q];
        si += ar * vni[q] - ai * vnr[q];
        pr[q] += ar * vj.0 - ai * vj.1;
        pi[q] += ar * vj.1 + ai * vj.0;
    }
    sr += hsum(accr.to_array());
    si += hsum(acci.to_array());
    (sr, si)
}

/// Complex Hermitian version with split real/imaginary storage. The
/// reflectors follow the zlarfg convention (real β on the subdiagonal),
/// so the returned tridiagonal is real symmetric. Reflectors are stored as
/// in the real case with A = Q T Qᴴ, H_k = I − τ_k v vᴴ.
pub fn tridiagonalize_hermitian(re: &mut [f64], im: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<(f64, f64)>) {
    assert_eq!(re.len(), n * n);
    assert_eq!(im.len(), n * n);
    let avx = avx2_available();
    let mut taus = vec![(0.0, 0.0); n.saturating_sub(1)];
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let z = || vec![0.0; n];
    let (mut vor, mut voi, mut wor, mut woi) = (z(), z(), z(), z());
    let (mut vnr, mut vni, mut pr, mut pi) = (z(), z(), z(), z());
    for k in 0..n {
        {
            let (cr, ci) = (&mut re[k * n..(k + 1) * n], &mut im[k * n..(k + 1) * n]);
            let cw = (wor[k], -woi[k]);
            let cv = (vor[k], -voi[k]);
            for i in k..n {
                cr[i] -= vor[i] * cw.0 - voi[i] * cw.1 + wor[i] * cv.0 - woi[i] * cv.1;
                ci[i] -= vor[i] * cw.1 + voi[i] * cw.0 + wor[i] * cv.1 + woi[i] * cv.0;
            }
            d[k] = cr[k];
        }
        if k + 1 >= n {
            break;
        }
        let (cr, ci) = (&re[k * n..(k + 1) * n], &im[k * n..(k + 1) * n]);
        let (ar, ai) = (cr[k + 1], ci[k + 1]);
        let xn2: f64 = (k + 2..n).map(|i| cr[i] * cr[i] + ci[i] * ci[i]).sum();
        vnr.iter_mut().for_each(|x| *x = 0.0);
        vni.iter_mut().for_each(|x| *x = 0.0);
        let mut tau = (0.0, 0.0);
        if xn2 == 0.0 && ai == 0.0 {
            e[k] = ar;
        } else {
            let norm = (ar * ar + ai * ai + xn2).sqrt();
            let beta = if ar >= 0.0 { -norm } else { norm };
            tau = ((beta - ar) / beta, -ai / beta);
            let (dr, di) = (ar - beta, ai);
            let den = dr * dr + di * di;
            let (sr, si) = (dr / den, -di / den);
            vnr[k + 1] = 1.0;
            for i in k + 2..n {
                vnr[i] = cr[i] * sr - ci[i] * si;
                vni[i] = cr[i] * si + ci[i] * sr;
            }
            e[k] = beta;
        }
        taus[k] = tau;
        re[k * n + k + 1..(k + 1) * n].copy_from_slice(&vnr[k + 1..]);
        im[k * n + k + 1..(k + 1) * n].copy_from_slice(&vni[k + 1..]);
        pr.iter_mut().for_each(|x| *x = 0.0);
        pi.iter_mut().for_each(|x| *x = 0.0);
        for j in k + 1..n {
            let (cr, ci) = (&mut re[j * n..(j + 1) * n], &mut im[j * n..(j + 1) * n]);
            let cw = (wor[j], -woi[j]);
            let cv = (vor[j], -voi[j]);
            let ajj = cr[j] - 2.0 * (vor[j] * wor[j] + voi[j] * woi[j]);
            cr[j] = ajj;
            ci[j] = 0.0;
            let vj = (vnr[j], vni[j]);
            let mut s = (ajj * vj.0, ajj * vj.1);
            if j + 1 < n {
                let r = fused_cplx_dispatch(
                    avx,
                    &mut cr[j + 1..],
                    &mut ci[j + 1..],
                    (&vor[j + 1..], &voi[j + 1..]),
                    (&wor[j + 1..], &woi[j + 1..]),
                    (&vnr[j + 1..], &vni[j + 1..]),
                    (&mut pr[j + 1..], &mut pi[j + 1..]),
                    cw,
                    cv,
                    vj,
                );
                s.0 += r.0;
                s.1 += r.1;
            }
            pr[j] += s.0;
            pi[j] += s.1;
        }
        let (mut pvr, mut pvi) = (0.0, 0.0);
        for i in k + 1..n {
            let (a, b) = (pr[i], pi[i]);
            pr[i] = tau.0 * a - tau.1 * b;
            pi[i] = tau.0 * b + tau.1 * a;
            pvr += pr[i] * vnr[i] + pi[i] * vni[i];
            pvi += pr[i] * vni[i] - pi[i] * vnr[i];
        }
        let al = (-0.5 * (tau.0 * pvr - tau.1 * pvi), -0.5 * (tau.0 * pvi + tau.1 * pvr));
        for i in 0..n {
            if i > k {
                wor[i] = pr[i] + al.0 * vnr[i] - al.1 * vni[i];
                woi[i] = pi[i] + al.0 * vni[i] + al.1 * vnr[i];
            } else {
                wor[i] = 0.0;
                woi[i] = 0.0;
            }
            vor[i] = vnr[i];
            voi[i] = vni[i];
        }
    }
    (d, e, taus)
}

/// Eigenvalues of the symmetric tridiagonal (d, e) by implicit QL with
/// Wilkinson-type shifts; returned ascending.
pub fn tridiagonal_eigenvalues(mut d: Vec<f64>, e_in: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&e_in[..n - 1]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_SWEEPS {
                return Err(LabError::NonConvergence {
                    re: d[l],
                    im: 0.0,
                    iterations: iter,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues of a real symmetric matrix (column-major; copied).
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut work = a.to_vec();
    let (d, e, _) = tridiagonalize_real(&mut work, n);
    tridiagonal_eigenvalues(d, &e)
}

/// Eigenvalues of a complex Hermitian matrix given as split re/im parts.
pub fn hermitian_eigenvalues(re: &[f64], im: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut wr = re.to_vec();
    let mut wi = im.to_vec();
    let (d, e, _) = tridiagonalize_hermitian(&mut wr, &mut wi, n);
    tridiagonal_eigenvalues(d, &e)
}

/// Eigenvector of the tridiagonal (d, e) for the computed eigenvalue λ by
/// inverse iteration with a pivoted LU of T − λI; unit norm.
pub fn tridiagonal_eigenvector(d: &[f64], e: &[f64], lambda: f64) -> Vec<f64> {
    let n = d.len();
    if n == 1 {
        return vec![1.0];
    }
    let scale = d.iter().chain(e).fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * scale;
    let mut dd: Vec<f64> = d.iter().map(|x| x - lambda).collect();
    let mut du = e[..n - 1].to_vec();
    let mut dl = e[..n - 1].to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swap = vec![false; n - 1];
    for i in 0..n - 1 {
        if dd[i].abs() >= dl[i].abs() {
            if dd[i] == 0.0 {
                dd[i] = tiny;
            }
            let f = dl[i] / dd[i];
            dl[i] = f;
            dd[i + 1] -= f * du[i];
        } else {
            let f = dd[i] / dl[i];
            dd[i] = dl[i];
            dl[i] = f;
            let t = du[i];
            du[i] = dd[i + 1];
            dd[i + 1] = t - f * dd[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du[i + 1];
            }
            swap[i] = true;
        }
    }
    for x in dd.iter_mut() {
        if x.abs() < tiny {
            *x = tiny.copysign(*x);
        }
    }
    // Deterministic, non-degenerate start vector.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract()).collect();
    for _ in 0..3 {
        for i in 0..n - 1 {
            if swap[i] {
                let t = x[i];
                x[i] = x[i + 1];
                x[i + 1] = t - dl[i] * x[i];
            } else {
                x[i + 1] -= dl[i] * x[i];
            }
        }
        x[n - 1] /= dd[n - 1];
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / dd[n - 2];
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / dd[i];
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
    }
    x
}

/// y = Q x for the reflectors left in `a` by [`tridiagonalize_real`].
pub fn apply_q_real(a: &[f64], n: usize, taus: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for k in (0..taus.len()).rev() {
        let tau = taus[k];
        if tau == 0.0 {
            continue;
        }
        let v = &a[k * n + k + 1..(k + 1) * n];
        let s: f64 = v.iter().zip(&y[k + 1..]).map(|(p, q)| p * q).sum::<f64>() * tau;
        y[k + 1..].iter_mut().zip(v).for_each(|(q, p)| *q -= s * p);
    }
    y
}

/// y = Q x for the reflectors left by [`tridiagonalize_hermitian`].
pub fn apply_q_hermitian(re: &[f64], im: &[f64], n: usize, taus: &[(f64, f64)], x: &[f64]) -> Vec<(f64, f64)> {
    let mut yr = x.to_vec();
    let mut yi = vec![0.0; n];
    for k in (0..taus.len()).rev() {
        let (tr, ti) = taus[k];
        if tr == 0.0 && ti == 0.0 {
            continue;
        }
        let (vr, vi) = (&re[k * n + k + 1..(k + 1) * n], &im[k * n + k + 1..(k + 1) * n]);
        // s = τ·(vᴴ y)
        let (mut sr, mut si) = (0.0, 0.0);
        for (q, (pr, pi)) in vr.iter().zip(vi).enumerate() {
            let (a, b) = (yr[k + 1 + q], yi[k + 1 + q]);
            sr += pr * a + pi * b;
            si += pr * b - pi * a;
        }
        let (sr, si) = (tr * sr - ti * si, tr * si + ti * sr);
        for (q, (pr, pi)) in vr.iter().zip(vi).enumerate() {
            yr[k + 1 + q] -= sr * pr - si * pi;
            yi[k + 1 + q] -= sr * pi + si * pr;
        }
    }
    yr.into_iter().zip(yi).collect()
}

/// Eigenvalues plus ‖Hy − λy‖ for the eigenpairs at `probe` (indices into
/// the ascending spectrum); y is rebuilt from the tridiagonal eigenvector.
pub fn symmetric_eigenvalues_probed(a: &[f64], n: usize, probe: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut work = a.to_vec();
    let (d, e, taus) = tridiagonalize_real(&mut work, n);
    let ev = tridiagonal_eigenvalues(d.clone(), &e)?;
    let residuals = probe
        .iter()
        .map(|&k| {
            let y = apply_q_real(&work, n, &taus, &tridiagonal_eigenvector(&d, &e, ev[k]));
            let mut r: Vec<f64> = y.iter().map(|v| -ev[k] * v).collect();
            for (j, &yj) in y.iter().enumerate() {
                r.iter_mut().zip(&a[j * n..(j + 1) * n]).for_each(|(ri, aij)| *ri += aij * yj);
            }
            r.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();
    Ok((ev, residuals))
}

/// Complex Hermitian counterpart of [`symmetric_eigenvalues_probed`].
pub fn hermitian_eigenvalues_probed(re: &[f64], im: &[f64], n: usize, probe: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut wr = re.to_vec();
    let mut wi = im.to_vec();
    let (d, e, taus) = tridiagonalize_hermitian(&mut wr, &mut wi, n);
    let ev = tridiagonal_eigenvalues(d.clone(), &e)?;
    let residuals = probe
        .iter()
        .map(|&k| {
            let y = apply_q_hermitian(&wr, &wi, n, &taus, &tridiagonal_eigenvector(&d, &e, ev[k]));
            let mut rr: Vec<f64> = y.iter().map(|v| -ev[k] * v.0).collect();
            let mut ri: Vec<f64> = y.iter().map(|v| -ev[k] * v.1).collect();
            for (j, &(yr, yi)) in y.iter().enumerate() {
                let (cr, ci) = (&re[j * n..(j + 1) * n], &im[j * n..(j + 1) * n]);
                for i in 0..n {
                    rr[i] += cr[i] * yr - ci[i] * yi;
                    ri[i] += cr[i] * yi + ci[i] * yr;
                }
            }
            rr.iter().zip(&ri).map(|(a, b)| a * a + b * b).sum::<f64>().sqrt()
        })
        .collect();
    Ok((ev, residuals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn random_sym(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![0.0; n * n];
        for j in 0..n {
            for i in j..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[j * n + i] = x;
                a[i * n + j] = x;
            }
        }
        a
    }

    #[test]
    fn small_examples() {
        let a = [3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(symmetric_eigenvalues(&a, 3).unwrap(), vec![-1.0, 2.0, 3.0]);
        let b = [0.0, 1.0, 1.0, 0.0];
        let ev = symmetric_eigenvalues(&b, 2).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
        assert_eq!(symmetric_eigenvalues(&[5.0], 1).unwrap(), vec![5.0]);
        assert!(symmetric_eigenvalues(&[], 0).unwrap().is_empty());
    }

    #[test]
    fn real_matches_nalgebra() {
        for n in [2, 3, 5, 17, 64, 150] {
            let a = random_sym(n, n as u64);
            let ours = symmetric_eigenvalues(&a, n).unwrap();
            let mut reference: Vec<f64> = SymmetricEigen::new(DMatrix::from_column_slice(n, n, &a)).eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for (x, y) in ours.iter().zip(&reference) {
                assert!((x - y).abs() < 1e-11 * n as f64, "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn probed_residuals_are_tiny() {
        for n in [1, 2, 7, 120] {
            let a = random_sym(n, 40 + n as u64);
            let probe: Vec<usize> = vec![0, n / 2, n - 1];
            let (ev, res) = symmetric_eigenvalues_probed(&a, n, &probe).unwrap();
            let norm = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for r in res {
                assert!(r <= 1e-12 * norm.max(1.0) * n as f64, "n={n}: {r}");
            }
        }
        // Repeated eigenvalues: identity plus a rank-one bump.
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        a[0] = 2.0;
        let (_, res) = symmetric_eigenvalues_probed(&a, n, &[1, 2, 5]).unwrap();
        assert!(res.iter().all(|r| *r < 1e-13), "{res:?}");
    }

    #[test]
    fn hermitian_probed_residuals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let n = 50;
        let mut re = vec![0.0; n * n];
        let mut im = vec![0.0; n * n];
        for j in 0..n {
            for i in j..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                let y: f64 = if i == j { 0.0 } else { rng.random_range(-1.0..1.0) };
                re[j * n + i] = x;
                im[j * n + i] = y;
                re[i * n + j] = x;
                im[i * n + j] = -y;
            }
        }
        let (_, res) = hermitian_eigenvalues_probed(&re, &im, n, &[0, 10, 25, 49]).unwrap();
        assert!(res.iter().all(|r| *r < 1e-11), "{res:?}");
    }

    #[test]
    fn hermitian_matches_nalgebra() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for n in [1, 2, 3, 6, 33, 101] {
            let mut re = vec![0.0; n * n];
            let mut im = vec![0.0; n * n];
            let mut m = DMatrix::<Complex64>::zeros(n, n);
            for j in 0..n {
                for i in j..n {
                    let x: f64 = rng.random_range(-1.0..1.0);
                    let y: f64 = if i == j { 0.0 } else { rng.random_range(-1.0..1.0) };
                    re[j * n + i] = x;
                    im[j * n + i] = y;
                    re[i * n + j] = x;
                    im[i * n + j] = -y;
                    m[(i, j)] = Complex64::new(x, y);
                    m[(j, i)] = Complex64::new(x, -y);
                }
            }
            let ours = hermitian_eigenvalues(&re, &im, n).unwrap();
            let mut reference: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for (x, y) in ours.iter().zip(&reference) {
                assert!((x - y).abs() < 1e-11 * n as f64, "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn already_tridiagonal_and_zero_columns() {
        // Column with an exactly zero tail exercises the τ = 0 path.
        let n = 4;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = i as f64;
        }
        a[1] = 0.5;
        a[n] = 0.5;
        let ev = symmetric_eigenvalues(&a, n).unwrap();
        let r = 0.5f64.sqrt();
        let expect = [0.5 - r, 0.5 + r, 2.0, 3.0];
        for (x, y) in ev.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[cfg(target_arch = "x86_64")]
    #[test]
    fn vector_paths_agree_bitwise() {
        if !avx2_available() {
            return;
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut v = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        for n in [1, 4, 7, 33] {
            let (vo, wo, vn, vo2, wo2, vn2) = (v(n), v(n), v(n), v(n), v(n), v(n));
            let (col, pn) = (v(n), v(n));
            let (mut c1, mut p1, mut c2, mut p2) = (col.clone(), pn.clone(), col.clone(), pn.clone());
            let s1 = fused_real(&mut c1, &vo, &wo, &vn, &mut p1, 0.3, -0.7, 1.1);
            let s2 = unsafe { avx::fused_real(&mut c2, &vo, &wo, &vn, &mut p2, 0.3, -0.7, 1.1) };
            assert_eq!((s1.to_bits(), &c1, &p1), (s2.to_bits(), &c2, &p2));
            let (ci, pi) = (v(n), v(n));
            let (mut a1, mut b1, mut q1, mut r1) = (col.clone(), ci.clone(), pn.clone(), pi.clone());
            let (mut a2, mut b2, mut q2, mut r2) = (col.clone(), ci.clone(), pn.clone(), pi.clone());
            let args = ((0.2, -0.4), (0.9, 0.1), (-0.3, 0.6));
            let t1 = fused_cplx(&mut a1, &mut b1, (&vo, &vo2), (&wo, &wo2), (&vn, &vn2), (&mut q1, &mut r1), args.0, args.1, args.2);
            let t2 = unsafe { avx::fused_cplx(&mut a2, &mut b2, (&vo, &vo2), (&wo, &wo2), (&vn, &vn2), (&mut q2, &mut r2), args.0, args.1, args.2) };
            assert_eq!((t1.0.to_bits(), t1.1.to_bits()), (t2.0.to_bits(), t2.1.to_bits()));
            assert_eq!((a1, b1, q1, r1), (a2, b2, q2, r2));
        }
    }
}
