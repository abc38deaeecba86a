//! Rate-1/3 tail-biting convolutional code, constraint length 7, generators
//! 133/171/165 (octal), with a soft-input wrap-around Viterbi decoder.

pub const CONSTRAINT_LENGTH: usize = 7;
pub const GENERATORS: [u32; 3] = [0o133, 0o171, 0o165];
const N_STATES: usize = 1 << (CONSTRAINT_LENGTH - 1);
/// Trellis steps decoded on each side of the block before committing.
const WRAP: usize = 96;

/// Register with the current input at bit 6 and the oldest bit at bit 0.
#[inline]
fn branch_output(state: usize, input: u8) -> [u8; 3] {
    let reg = ((input as u32) << 6) | state as u32;
    GENERATORS.map(|g| ((reg & g).count_ones() & 1) as u8)
}

#[inline]
fn next_state(state: usize, input: u8) -> usize {
    ((input as usize) << 5) | (state >> 1)
}

/// Tail-biting encoding: the register starts loaded with the last six
/// input bits, so the trellis ends in the state it started from. Output is
/// interleaved per step as `d0 d1 d2`.
pub fn encode(bits: &[u8]) -> Vec<u8> {
    let n = bits.len();
    let mut state = 0usize;
    for i in 0..(CONSTRAINT_LENGTH - 1).min(n) {
        // bit 5 holds c[n-1], bit 0 holds c[n-6]
        state |= (bits[n - 1 - i] as usize & 1) << (5 - i);
    }
    let mut out = Vec::with_capacity(3 * n);
    for &b in bits {
        out.extend_from_slice(&branch_output(state, b & 1));
        state = next_state(state, b & 1);
    }
    out
}

struct Trellis {
    /// Per next-state: the two predecessor states and their branch outputs
    /// encoded as +/-1 signs.
    preds: Vec<[(usize, [f32; 3]); 2]>,
}

impl Trellis {
    fn new() -> Self {
        let preds = (0..N_STATES)
            .map(|ns| {
                let input = (ns >> 5) as u8;
                [0usize, 1].map(|x| {
                    let prev = ((ns & 0x1F) << 1) | x;
                    debug_assert_eq!(next_state(prev, input), ns);
                    let out = branch_output(prev, input);
                    (prev, out.map(|c| 1.0 - 2.0 * c as f32))
                })
            })
            .collect();
        Self { preds }
    }
}

/// Soft-input Viterbi decoding of a tail-biting code. LLRs are
/// `log P(bit=0)/P(bit=1)`, three per information bit. The trellis is run
/// over the block extended cyclically by `WRAP` steps on each side, and
/// the middle is kept.
pub fn viterbi_decode(llrs: &[f32]) -> Vec<u8> {
    assert_eq!(llrs.len() % 3, 0, "LLR count must be a multiple of three");
    let n = llrs.len() / 3;
    if n == 0 {
        return Vec::new();
    }
    let trellis = Trellis::new();
    let wrap = WRAP.min(n * 4);
    let total = n + 2 * wrap;
    let step_llr = |t: usize| {
        let i = (t + n * (wrap / n + 1) - wrap) % n;
        [llrs[3 * i], llrs[3 * i + 1], llrs[3 * i + 2]]
    };

    let mut metric = vec![0.0f32; N_STATES];
    let mut next = vec![0.0f32; N_STATES];
    let mut decisions = vec![0u64; total];
    for (t, dec) in decisions.iter_mut().enumerate() {
        let l = step_llr(t);
        let mut bits = 0u64;
        for (ns, preds) in trellis.preds.iter().enumerate() {
            let m = |(p, s): &(usize, [f32; 3])| metric[*p] + s[0] * l[0] + s[1] * l[1] + s[2] * l[2];
            let m0 = m(&preds[0]);
            let m1 = m(&preds[1]);
            if m1 > m0 {
                next[ns] = m1;
                bits |= 1 << ns;
            } else {
                next[ns] = m0;
            }
        }
        *dec = bits;
        // keep metrics bounded
        let max = next.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        for (m, v) in metric.iter_mut().zip(&next) {
            *m = v - max;
        }
    }

    let mut state = metric
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(s, _)| s)
        .unwrap();
    let mut path = vec![0u8; total];
    for t in (0..total).rev() {
        path[t] = (state >> 5) as u8;
        let x = ((decisions[t] >> state) & 1) as usize;
        state = ((state & 0x1F) << 1) | x;
    }
    path[wrap..wrap + n].to_vec()
}
