//! Thin safe wrappers over the LAPACK/BLAS routines the crate needs.
//!
//! Matrices are column-major `Vec<f64>`; eigenvalues come back ascending and
//! eigenvector `j` occupies `z[j*n .. (j+1)*n]`.

use crate::error::{Error, Result};

pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column-major `n × n` eigenvector matrix, when requested.
    pub vectors: Option<Vec<f64>>,
}

fn check(info: i32, routine: &str) -> Result<()> {
    if info != 0 {
        return Err(Error::Numerical(format!("{routine} returned info = {info}")));
    }
    Ok(())
}

fn to_i32(n: usize) -> Result<i32> {
    i32::try_from(n).map_err(|_| Error::Numerical(format!("dimension {n} exceeds LAPACK integer range")))
}

/// Symmetric tridiagonal eigenproblem (`dstevr`, MRRR).
pub fn tridiagonal(diag: &[f64], off: &[f64], vectors: bool) -> Result<SymmetricEigen> {
    let n = diag.len();
    if n == 0 {
        return Ok(SymmetricEigen { values: vec![], vectors: vectors.then(Vec::new) });
    }
    if off.len() + 1 != n {
        return Err(Error::Numerical("off-diagonal length must be n − 1".into()));
    }
    let ni = to_i32(n)?;
    let mut d = diag.to_vec();
    // dstevr wants length n for e (last entry is workspace)
    let mut e = off.to_vec();
    e.push(0.0);
    let mut m = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; if vectors { n * n } else { 1 }];
    let mut isuppz = vec![0; 2 * n];
    let mut work = vec![0.0; 20 * n];
    let mut iwork = vec![0; 10 * n];
    let mut info = 0;
    let jobz = if vectors { b'V' } else { b'N' };
    unsafe {
        lapack::dstevr(
            jobz,
            b'A',
            ni,
            &mut d,
            &mut e,
            0.0,
            0.0,
            0,
            0,
            0.0,
            &mut m,
            &mut w,
            &mut z,
            ni,
            &mut isuppz,
            &mut work,
            20 * ni,
            &mut iwork,
            10 * ni,
            &mut info,
        );
    }
    check(info, "dstevr")?;
    if m as usize != n {
        return Err(Error::Numerical(format!("dstevr found {m} of {n} eigenvalues")));
    }
    Ok(SymmetricEigen { values: w, vectors: vectors.then_some(z) })
}

/// Symmetric band eigenproblem (`dsbevd`). `ab` is LAPACK lower band storage
/// with leading dimension `kd + 1`: `ab[(i − j) + j·(kd+1)] = A[i][j]` for
/// `j ≤ i ≤ j + kd`.
pub fn banded(n: usize, kd: usize, ab: &[f64], vectors: bool) -> Result<SymmetricEigen> {
    if n == 0 {
        return Ok(SymmetricEigen { values: vec![], vectors: vectors.then(Vec::new) });
    }
    let ldab = kd + 1;
    if ab.len() != ldab * n {
        return Err(Error::Numerical("band storage has the wrong length".into()));
    }
    let (ni, kdi, ldabi) = (to_i32(n)?, to_i32(kd)?, to_i32(ldab)?);
    let mut ab = ab.to_vec();
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; if vectors { n * n } else { 1 }];
    let ldz = if vectors { ni } else { 1 };
    let jobz = if vectors { b'V' } else { b'N' };
    let mut info = 0;
    let mut wq = [0.0];
    let mut iq = [0];
    unsafe {
        lapack::dsbevd(jobz, b'L', ni, kdi, &mut ab, ldabi, &mut w, &mut z, ldz, &mut wq, -1, &mut iq, -1, &mut info);
    }
    check(info, "dsbevd workspace query")?;
    let lwork = wq[0] as usize;
    let liwork = iq[0].max(1) as usize;
    let mut work = vec![0.0; lwork.max(1)];
    let mut iwork = vec![0; liwork];
    let (lw, liw) = (to_i32(work.len())?, to_i32(liwork)?);
    unsafe {
        lapack::dsbevd(
            jobz,
            b'L',
            ni,
            kdi,
            &mut ab,
            ldabi,
            &mut w,
            &mut z,
            ldz,
            &mut work,
            lw,
            &mut iwork,
            liw,
            &mut info,
        );
    }
    check(info, "dsbevd")?;
    Ok(SymmetricEigen { values: w, vectors: vectors.then_some(z) })
}

/// Dense symmetric eigenproblem (`dsyevd`); `a` is column-major `n × n`.
pub fn dense(n: usize, a: &[f64], vectors: bool) -> Result<SymmetricEigen> {
    if n == 0 {
        return Ok(SymmetricEigen { values: vec![], vectors: vectors.then(Vec::new) });
    }
    if a.len() != n * n {
        return Err(Error::Numerical("dense matrix has the wrong length".into()));
    }
    let ni = to_i32(n)?;
    let mut a = a.to_vec();
    let mut w = vec![0.0; n];
    let jobz = if vectors { b'V' } else { b'N' };
    let mut info = 0;
    let mut wq = [0.0];
    let mut iq = [0];
    unsafe {
        lapack::dsyevd(jobz, b'L', ni, &mut a, ni, &mut w, &mut wq, -1, &mut iq, -1, &mut info);
    }
    check(info, "dsyevd workspace query")?;
    let mut work = vec![0.0; (wq[0] as usize).max(1)];
    let mut iwork = vec![0; iq[0].max(1) as usize];
    let (lw, liw) = (to_i32(work.len())?, to_i32(iwork.len())?);
    unsafe {
        lapack::dsyevd(
            jobz,
            b'L',
            ni,
            &mut a,
            ni,
            &mut w,
            &mut work,
            lw,
            &mut iwork,
            liw,
            &mut info,
        );
    }
    check(info, "dsyevd")?;
    Ok(SymmetricEigen { values: w, vectors: vectors.then_some(a) })
}

/// `C = Aᵀ B` for column-major `A: k × m`, `B: k × n`; returns `m × n`.
pub fn at_b(a: &[f64], b: &[f64], k: usize, m: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    unsafe {
        blas::dgemm(b'T', b'N', m as i32, n as i32, k as i32, 1.0, a, k as i32, b, k as i32, 0.0, &mut c, m as i32);
    }
    c
}

/// `C = A B` for column-major `A: m × k`, `B: k × n`; returns `m × n`.
pub fn a_b(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    unsafe {
        blas::dgemm(b'N', b'N', m as i32, n as i32, k as i32, 1.0, a, m as i32, b, k as i32, 0.0, &mut c, m as i32);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routines_agree_on_a_small_matrix() {
        // path graph on 3 sites with diagonal (1, -1, 0.5)
        let d = [1.0, -1.0, 0.5];
        let e = [1.0, 1.0];
        let t = tridiagonal(&d, &e, true).unwrap();
        let ab = vec![1.0, 1.0, -1.0, 1.0, 0.5, 0.0];
        let b = banded(3, 1, &ab, false).unwrap();
        let a = vec![1.0, 1.0, 0.0, 1.0, -1.0, 1.0, 0.0, 1.0, 0.5];
        let g = dense(3, &a, false).unwrap();
        for i in 0..3 {
            assert!((t.values[i] - b.values[i]).abs() < 1e-13);
            assert!((t.values[i] - g.values[i]).abs() < 1e-13);
        }
        let z = t.vectors.unwrap();
        let ztz = at_b(&z, &z, 3, 3, 3);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ztz[i + 3 * j] - expect).abs() < 1e-13);
            }
        }
    }
}
