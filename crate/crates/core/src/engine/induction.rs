use crate::adversary::{Adversary, Move};
use crate::engine::enumerate::admissible_options;
use crate::engine::transcript::{Cursor, Setting};
use crate::error::{Error, Result};

/// `sup_A Σ_τ leaf(P_A(τ), Q_A(τ))` over deterministic adversaries making
/// `rounds` queries, with a maximizing adversary.
///
/// The objective is a sum over leaves of the strategy tree, and the subtrees
/// below different histories are chosen independently, so maximizing each
/// subtree separately (backward induction) is optimal. `leaf(0, 0)` must be
/// zero; branches with probability zero on both sides are never expanded.
pub fn sup_by_induction<F>(setting: &Setting<'_>, rounds: usize, leaf: F) -> Result<(f64, Adversary)>
where
    F: Fn(f64, f64) -> f64,
{
    if rounds == 0 || rounds > setting.max_rounds() {
        return Err(Error::InvalidParameter(format!(
            "rounds must lie in 1..={}",
            setting.max_rounds()
        )));
    }
    let mut cursor = Cursor::new([&setting.left[..], &setting.right[..]]);
    let (value, root) = best(&mut cursor, [1.0, 1.0], rounds, &leaf)?;
    Ok((value, Adversary::new(setting.arity(), rounds, root)?))
}

fn best<F>(cursor: &mut Cursor<'_, '_, 2>, reach: [f64; 2], rounds: usize, leaf: &F) -> Result<(f64, Move)>
where
    F: Fn(f64, f64) -> f64,
{
    let options = admissible_options(cursor, &reach);
    if options.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no admissible query after {} rounds",
            cursor.transcript.len()
        )));
    }
    let mut winner: Option<(f64, Move)> = None;
    for (i, x) in options {
        let rows = cursor.rows(&reach, i, x)?;
        let n = cursor.response_count(i);
        let mut replies = vec![None; n];
        let mut total = 0.0;
        for y in 0..n {
            let p = rows[0].map_or(0.0, |r| reach[0] * r[y]);
            let q = rows[1].map_or(0.0, |r| reach[1] * r[y]);
            if p == 0.0 && q == 0.0 {
                continue;
            }
            if cursor.transcript.len() + 1 == rounds {
                total += leaf(p, q);
            } else {
                cursor.push(i, x, y);
                let sub = best(cursor, [p, q], rounds, leaf);
                cursor.pop();
                let (v, m) = sub?;
                total += v;
                replies[y] = Some(m);
            }
        }
        if winner.as_ref().is_none_or(|(v, _)| total > *v) {
            winner = Some((
                total,
                Move {
                    system: i,
                    query: x,
                    replies,
                },
            ));
        }
    }
    Ok(winner.expect("options are nonempty"))
}
