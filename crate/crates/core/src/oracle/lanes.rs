//! Sixteen-lane SHA-256 over equal-length messages (AVX-512).
//!
//! Used for per-tile tickets, where every message has the same length.
//! Callers lay out `LANES` pre-padded messages `stride` bytes apart.

pub(crate) const LANES: usize = 16;

const H0: [u32; 8] = [
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
];

#[cfg(target_arch = "x86_64")]
const K: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
];

/// Whether the sixteen-lane kernel can run on this machine.
pub(crate) fn available() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::arch::is_x86_feature_detected!("avx512f") && std::arch::is_x86_feature_detected!("avx512bw")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// Length of a message of `len` bytes after SHA-256 padding.
pub(crate) fn padded_len(len: usize) -> usize {
    (len + 9).div_ceil(64) * 64
}

/// Writes the padding for a `len`-byte message into `buf[len..]`.
pub(crate) fn pad(buf: &mut [u8], len: usize) {
    debug_assert_eq!(buf.len(), padded_len(len));
    buf[len] = 0x80;
    let end = buf.len();
    buf[len + 1..end - 8].fill(0);
    buf[end - 8..].copy_from_slice(&((len as u64) * 8).to_be_bytes());
}

/// Final state words of the `LANES` messages at `buf[k * stride..]`.
///
/// Panics unless the buffer holds `LANES` padded messages and the kernel is
/// available.
pub(crate) fn digest_lanes(buf: &[u8], stride: usize) -> [[u32; 8]; LANES] {
    assert!(stride.is_multiple_of(64) && stride > 0 && buf.len() >= LANES * stride);
    assert!(available(), "sixteen-lane SHA-256 needs AVX-512F and AVX-512BW");
    #[cfg(target_arch = "x86_64")]
    // SAFETY: features checked above; lane `k` reads only
    // `buf[k * stride..(k + 1) * stride]`.
    unsafe {
        x86::digest16(buf.as_ptr(), stride)
    }
    #[cfg(not(target_arch = "x86_64"))]
    unreachable!()
}

#[cfg(target_arch = "x86_64")]
mod x86 {
    use super::{H0, K, LANES};
    use std::arch::x86_64::*;

    #[target_feature(enable = "avx512f,avx512bw")]
    pub(super) unsafe fn digest16(base: *const u8, stride: usize) -> [[u32; 8]; LANES] {
        let mut st = [_mm512_setzero_si512(); 8];
        for (s, &h) in st.iter_mut().zip(&H0) {
            *s = _mm512_set1_epi32(h as i32);
        }
        let bswap = _mm512_set4_epi32(0x0c0d0e0f, 0x08090a0b, 0x04050607, 0x00010203);
        for blk in 0..stride / 64 {
            let mut w = load_transposed(base.add(blk * 64), stride);
            for wt in w.iter_mut() {
                *wt = _mm512_shuffle_epi8(*wt, bswap);
            }
            let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut h] = st;
            for (t, &k) in K.iter().enumerate() {
                let wt = if t < 16 {
                    w[t]
                } else {
                    let w15 = w[(t - 15) & 15];
                    let w2 = w[(t - 2) & 15];
                    let s0 = _mm512_ternarylogic_epi32::<0x96>(
                        _mm512_ror_epi32::<7>(w15),
                        _mm512_ror_epi32::<18>(w15),
                        _mm512_srli_epi32::<3>(w15),
                    );
                    let s1 = _mm512_ternarylogic_epi32::<0x96>(
                        _mm512_ror_epi32::<17>(w2),
                        _mm512_ror_epi32::<19>(w2),
                        _mm512_srli_epi32::<10>(w2),
                    );
                    let v = _mm512_add_epi32(
                        _mm512_add_epi32(w[t & 15], s0),
                        _mm512_add_epi32(w[(t - 7) & 15], s1),
                    );
                    w[t & 15] = v;
                    v
                };
                let s1 = _mm512_ternarylogic_epi32::<0x96>(
                    _mm512_ror_epi32::<6>(e),
                    _mm512_ror_epi32::<11>(e),
                    _mm512_ror_epi32::<25>(e),
                );
                let ch = _mm512_ternarylogic_epi32::<0xCA>(e, f, g);
                let t1 = _mm512_add_epi32(
                    _mm512_add_epi32(h, s1),
                    _mm512_add_epi32(ch, _mm512_add_epi32(wt, _mm512_set1_epi32(k as i32))),
                );
                let s0 = _mm512_ternarylogic_epi32::<0x96>(
                    _mm512_ror_epi32::<2>(a),
                    _mm512_ror_epi32::<13>(a),
                    _mm512_ror_epi32::<22>(a),
                );
                let t2 = _mm512_add_epi32(s0, _mm512_ternarylogic_epi32::<0xE8>(a, b, c));
                h = g;
                g = f;
                f = e;
                e = _mm512_add_epi32(d, t1);
                d = c;
                c = b;
                b = a;
                a = _mm512_add_epi32(t1, t2);
            }
            for (s, v) in st.iter_mut().zip([a, b, c, d, e, f, g, h]) {
                *s = _mm512_add_epi32(*s, v);
            }
        }
        let mut out = [[0u32; 8]; LANES];
        let mut tmp = [0u32; LANES];
        for (i, s) in st.iter().enumerate() {
            _mm512_storeu_si512(tmp.as_mut_ptr().cast(), *s);
            for (o, &x) in out.iter_mut().zip(&tmp) {
                o[i] = x;
            }
        }
        out
    }

    /// Loads one 64-byte block from each of the 16 lanes; vector `t` of the
    /// result holds word `t` of every lane.
    #[target_feature(enable = "avx512f,avx512bw")]
    unsafe fn load_transposed(base: *const u8, stride: usize) -> [__m512i; 16] {
        let mut r = [_mm512_setzero_si512(); 16];
        for (k, v) in r.iter_mut().enumerate() {
            *v = _mm512_loadu_si512(base.add(k * stride).cast());
        }
        let mut t = [_mm512_setzero_si512(); 16];
        for i in 0..8 {
            t[2 * i] = _mm512_unpacklo_epi32(r[2 * i], r[2 * i + 1]);
            t[2 * i + 1] = _mm512_unpackhi_epi32(r[2 * i], r[2 * i + 1]);
        }
        // u[g][m]: words m, m+4, m+8, m+12 of lanes 4g..4g+4, one per 128-bit chunk
        let mut u = [[_mm512_setzero_si512(); 4]; 4];
        for (g, ug) in u.iter_mut().enumerate() {
            ug[0] = _mm512_unpacklo_epi64(t[4 * g], t[4 * g + 2]);
            ug[1] = _mm512_unpackhi_epi64(t[4 * g], t[4 * g + 2]);
            ug[2] = _mm512_unpacklo_epi64(t[4 * g + 1], t[4 * g + 3]);
            ug[3] = _mm512_unpackhi_epi64(t[4 * g + 1], t[4 * g + 3]);
        }
        let mut w = [_mm512_setzero_si512(); 16];
        for m in 0..4 {
            let lo01 = _mm512_shuffle_i32x4::<0x88>(u[0][m], u[1][m]);
            let hi01 = _mm512_shuffle_i32x4::<0xDD>(u[0][m], u[1][m]);
            let lo23 = _mm512_shuffle_i32x4::<0x88>(u[2][m], u[3][m]);
            let hi23 = _mm512_shuffle_i32x4::<0xDD>(u[2][m], u[3][m]);
            w[m] = _mm512_shuffle_i32x4::<0x88>(lo01, lo23);
            w[m + 4] = _mm512_shuffle_i32x4::<0x88>(hi01, hi23);
            w[m + 8] = _mm512_shuffle_i32x4::<0xDD>(lo01, lo23);
            w[m + 12] = _mm512_shuffle_i32x4::<0xDD>(hi01, hi23);
        }
        w
    }
}
