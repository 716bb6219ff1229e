use std::fmt;

/// A generator index raised to a nonzero integer power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter {
    pub generator: usize,
    pub power: i64,
}

impl Letter {
    pub const fn new(generator: usize, power: i64) -> Self {
        Letter { generator, power }
    }

    pub fn inverse(self) -> Self {
        Letter::new(self.generator, -self.power)
    }
}

/// A freely reduced word in lattice generators, read left to right as a
/// matrix product: `[g0^2, g1^-1]` is `g0^2 * g1^-1`.
///
/// Adjacent letters always carry distinct generators and no letter has power
/// zero; every constructor and mutator preserves this.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct GroupWord {
    letters: Vec<Letter>,
}

impl GroupWord {
    pub fn empty() -> Self {
        GroupWord { letters: Vec::new() }
    }

    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Self {
        let mut w = GroupWord::empty();
        for l in letters {
            w.push_right(l);
        }
        w
    }

    pub fn single(generator: usize, power: i64) -> Self {
        GroupWord::from_letters([Letter::new(generator, power)])
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// Number of letters after free reduction.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Sum of absolute powers.
    pub fn syllable_length(&self) -> u64 {
        self.letters.iter().map(|l| l.power.unsigned_abs()).sum()
    }

    /// Right-multiplies by `letter`, merging with the last letter when possible.
    pub fn push_right(&mut self, letter: Letter) {
        if letter.power == 0 {
            return;
        }
        match self.letters.last_mut() {
            Some(last) if last.generator == letter.generator => {
                last.power += letter.power;
                if last.power == 0 {
                    self.letters.pop();
                }
            }
            _ => self.letters.push(letter),
        }
    }

    /// Left-multiplies by `letter`.
    pub fn push_left(&mut self, letter: Letter) {
        let mut w = GroupWord::from_letters([letter]);
        w.append(self);
        *self = w;
    }

    /// Right-multiplies by `other`, cancelling across the junction.
    pub fn append(&mut self, other: &GroupWord) {
        for &l in &other.letters {
            self.push_right(l);
        }
    }

    /// `self * other`, freely reduced.
    pub fn concat(&self, other: &GroupWord) -> GroupWord {
        let mut w = self.clone();
        w.append(other);
        w
    }

    pub fn inverse(&self) -> GroupWord {
        GroupWord::from_letters(self.letters.iter().rev().map(|l| l.inverse()))
    }

    /// Formats the word with the given generator names; the empty word is `e`.
    pub fn display_with(&self, names: &[String]) -> String {
        if self.letters.is_empty() {
            return "e".to_string();
        }
        self.letters
            .iter()
            .map(|l| {
                let name = names
                    .get(l.generator)
                    .cloned()
                    .unwrap_or_else(|| format!("g{}", l.generator));
                format!("{}^{}", name, l.power)
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(&[]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn letter_strategy() -> impl Strategy<Value = Letter> {
        (0usize..2, -3i64..=3).prop_map(|(g, p)| Letter::new(g, p))
    }

    #[test]
    fn merging_and_cancellation() {
        let w = GroupWord::from_letters([
            Letter::new(0, 2),
            Letter::new(0, -2),
            Letter::new(1, 1),
            Letter::new(1, 3),
        ]);
        assert_eq!(w.letters(), &[Letter::new(1, 4)]);
        let mut v = GroupWord::single(0, 1);
        v.push_left(Letter::new(0, -1));
        assert!(v.is_empty());
    }

    proptest! {
        #[test]
        fn words_stay_freely_reduced(ls in proptest::collection::vec(letter_strategy(), 0..20)) {
            let w = GroupWord::from_letters(ls);
            for pair in w.letters().windows(2) {
                prop_assert_ne!(pair[0].generator, pair[1].generator);
            }
            prop_assert!(w.letters().iter().all(|l| l.power != 0));
            prop_assert!(w.concat(&w.inverse()).is_empty());
        }
    }
}
