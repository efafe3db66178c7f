//! Writes the parity-check matrices shipped under `data/codes`.
//!
//! ```text
//! cargo run -p ladn --example gen_codes -- crates/ladn/data/codes
//! ```
//!
//! * `hamming_7_4.alist`: the [7,4] Hamming code.
//! * `regular36_96_48.alist`: a (3,6)-regular [96,48] code without 4-cycles,
//!   standing in for MacKay's 96.33.964 matrix, which has the same
//!   dimensions and degrees.
//! * `ccsds_128_64.alist`: the CCSDS [128,64] code, assembled from its 16x16
//!   circulant description.
//! * `regular36_192_96.alist`: a (3,6)-regular [192,96] code.

use std::path::PathBuf;

use ladn::io::write_code;
use ladn_core::gf2::rank;
use ladn_core::rng::stream_rng;
use ladn_core::ParityCheckMatrix;
use rand::Rng;

/// Column-by-column construction: each column takes `wc` of the least-filled
/// rows, never two rows already shared by an earlier column. Restarts on a
/// dead end; keeps the first full-rank result.
fn regular(n: usize, wc: usize, wr: usize, seed: u64) -> ParityCheckMatrix {
    let m = n * wc / wr;
    assert_eq!(m * wr, n * wc);
    for attempt in 0.. {
        let mut rng = stream_rng(seed, attempt);
        let mut fill = vec![0usize; m];
        let mut paired = vec![false; m * m];
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut ok = true;
        for col in 0..n {
            let mut cand: Vec<(usize, u64, usize)> =
                (0..m).filter(|&r| fill[r] < wr).map(|r| (fill[r], rng.random::<u64>(), r)).collect();
            cand.sort_unstable();
            let mut picked: Vec<usize> = Vec::with_capacity(wc);
            for &(_, _, r) in &cand {
                if picked.iter().all(|&p| !paired[p * m + r]) {
                    picked.push(r);
                    if picked.len() == wc {
                        break;
                    }
                }
            }
            if picked.len() < wc {
                ok = false;
                break;
            }
            for (i, &a) in picked.iter().enumerate() {
                fill[a] += 1;
                rows[a].push(col);
                for &b in &picked[i + 1..] {
                    paired[a * m + b] = true;
                    paired[b * m + a] = true;
                }
            }
        }
        if !ok {
            continue;
        }
        let h = ParityCheckMatrix::from_rows(n, rows).expect("valid rows");
        if rank(&h) == m {
            eprintln!("({wc},{wr})-regular [{n},{}]: seed {seed}, attempt {attempt}", n - m);
            return h;
        }
    }
    unreachable!()
}

/// CCSDS [128,64]: 4x8 blocks of 16x16 circulants. Each entry lists the
/// shifts summed in that block (`Phi^k` has ones at `(i, (i + k) mod 16)`).
fn ccsds_128_64() -> ParityCheckMatrix {
    const M: usize = 16;
    let blocks: [[&[usize]; 8]; 4] = [
        [&[0, 7], &[2], &[14], &[6], &[], &[0], &[13], &[0]],
        [&[6], &[0, 15], &[0], &[1], &[0], &[], &[0], &[7]],
        [&[4], &[1], &[0, 15], &[14], &[11], &[0], &[], &[3]],
        [&[0], &[1], &[9], &[0, 13], &[14], &[1], &[0], &[]],
    ];
    let mut rows = Vec::with_capacity(4 * M);
    for block_row in &blocks {
        for i in 0..M {
            let mut row: Vec<usize> = block_row
                .iter()
                .enumerate()
                .flat_map(|(bc, shifts)| shifts.iter().map(move |k| bc * M + (i + k) % M))
                .collect();
            row.sort_unstable();
            rows.push(row);
        }
    }
    ParityCheckMatrix::from_rows(8 * M, rows).expect("valid rows")
}

fn hamming_7_4() -> ParityCheckMatrix {
    ParityCheckMatrix::from_rows(7, vec![vec![0, 2, 4, 6], vec![1, 2, 5, 6], vec![3, 4, 5, 6]]).expect("valid rows")
}

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/ladn/data/codes".into()));
    let ccsds = ccsds_128_64();
    eprintln!("ccsds [128,64]: rank {}", rank(&ccsds));
    let codes = [
        ("hamming_7_4.alist", hamming_7_4()),
        ("regular36_96_48.alist", regular(96, 3, 6, 96)),
        ("ccsds_128_64.alist", ccsds),
        ("regular36_192_96.alist", regular(192, 3, 6, 192)),
    ];
    for (name, h) in &codes {
        write_code(&dir.join(name), h)?;
        eprintln!("wrote {}", dir.join(name).display());
    }
    Ok(())
}
