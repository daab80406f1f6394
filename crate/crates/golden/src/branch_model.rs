//! Enumerates a saturating two-bit counter over an outcome sequence.

/// Outcomes of a loop-closing branch run `n` times: taken n-1 times, then not taken.
pub fn loop_outcomes(n: usize) -> Vec<bool> {
    (0..n).map(|i| i + 1 < n).collect()
}

/// Mispredictions of a lone two-bit counter starting at `state` (0..=3).
pub fn two_bit_mispredictions(state: u8, outcomes: &[bool]) -> usize {
    let mut counter = state;
    let mut wrong = 0;
    for &taken in outcomes {
        let predicted = counter >= 2;
        if predicted != taken {
            wrong += 1;
        }
        counter = match (taken, counter) {
            (true, 3) => 3,
            (true, c) => c + 1,
            (false, 0) => 0,
            (false, c) => c - 1,
        };
    }
    wrong
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_enumerated() {
        // 3 -> T: 3, T: 3, N: wrong
        assert_eq!(two_bit_mispredictions(3, &loop_outcomes(3)), 1);
        // 0 -> T wrong (1), T wrong (2), N wrong (1)
        assert_eq!(two_bit_mispredictions(0, &loop_outcomes(3)), 3);
        // 0 -> T wrong, T wrong, T right, N wrong
        assert_eq!(two_bit_mispredictions(0, &loop_outcomes(4)), 3);
        // 0 -> T wrong, N right
        assert_eq!(two_bit_mispredictions(0, &loop_outcomes(2)), 1);
    }
}
