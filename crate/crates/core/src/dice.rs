//! Dice expressions: `NdM`, keep-highest/lowest, integer constants, `+`/`-` chaining.
//!
//! Rolls draw faces from a [`DieSource`], which is either a seeded ChaCha8
//! stream or a forced queue of faces. Forced sources make every recorded roll
//! replayable byte-for-byte.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand::{RngCore, SeedableRng};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Upper bounds that keep a single roll cheap.
pub const MAX_DICE_PER_GROUP: u32 = 1000;
pub const MAX_SIDES: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiceError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("forced die sequence exhausted")]
    ForcedSequenceExhausted,
    #[error("forced face {face} is outside 1..={sides}")]
    ForcedFaceOutOfRange { face: u32, sides: u32 },
}

impl DiceError {
    fn syntax(position: usize, message: impl Into<String>) -> Self {
        DiceError::Syntax {
            position,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeepMode {
    Highest,
    Lowest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeepRule {
    pub mode: KeepMode,
    pub n: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DieGroup {
    pub count: u32,
    pub sides: u32,
    pub keep: Option<KeepRule>,
}

impl DieGroup {
    pub fn new(count: u32, sides: u32) -> Self {
        DieGroup {
            count,
            sides,
            keep: None,
        }
    }

    pub fn keep(mut self, mode: KeepMode, n: u32) -> Self {
        self.keep = Some(KeepRule { mode, n });
        self
    }

    /// Number of faces that contribute to the total.
    pub fn kept_count(&self) -> u32 {
        self.keep.map_or(self.count, |k| k.n)
    }
}

impl fmt::Display for DieGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}d{}", self.count, self.sides)?;
        match self.keep {
            Some(KeepRule {
                mode: KeepMode::Highest,
                n,
            }) => write!(f, "kh{n}"),
            Some(KeepRule {
                mode: KeepMode::Lowest,
                n,
            }) => write!(f, "kl{n}"),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn apply(self, v: i64) -> i64 {
        match self {
            Sign::Plus => v,
            Sign::Minus => -v,
        }
    }

    fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Term {
    Dice { sign: Sign, group: DieGroup },
    Constant { sign: Sign, value: u32 },
}

impl Term {
    pub fn sign(&self) -> Sign {
        match *self {
            Term::Dice { sign, .. } | Term::Constant { sign, .. } => sign,
        }
    }
}

/// A parsed dice expression. Serializes as its canonical text form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiceExpr {
    terms: Vec<Term>,
}

impl DiceExpr {
    /// Builds an expression from terms, checking the group invariants.
    pub fn from_terms(terms: Vec<Term>) -> Result<Self, DiceError> {
        if terms.is_empty() {
            return Err(DiceError::syntax(0, "empty expression"));
        }
        for t in &terms {
            if let Term::Dice { group, .. } = t {
                validate_group(group, 0)?;
            }
        }
        Ok(DiceExpr { terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn groups(&self) -> impl Iterator<Item = &DieGroup> {
        self.terms.iter().filter_map(|t| match t {
            Term::Dice { group, .. } => Some(group),
            Term::Constant { .. } => None,
        })
    }

    /// Sum of all constant terms.
    pub fn constant_total(&self) -> i64 {
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Constant { sign, value } => sign.apply(value as i64),
                Term::Dice { .. } => 0,
            })
            .sum()
    }

    /// Appends a signed constant, folding it into the expression as a new term.
    pub fn plus_constant(mut self, value: i64) -> Self {
        if value != 0 {
            let sign = if value < 0 { Sign::Minus } else { Sign::Plus };
            self.terms.push(Term::Constant {
                sign,
                value: value.unsigned_abs() as u32,
            });
        }
        self
    }

    /// Same expression with every die count multiplied by `factor` (critical hits).
    pub fn with_dice_multiplied(&self, factor: u32) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| match *t {
                Term::Dice { sign, group } => Term::Dice {
                    sign,
                    group: DieGroup {
                        count: group.count * factor,
                        keep: group.keep.map(|k| KeepRule {
                            n: k.n * factor,
                            ..k
                        }),
                        ..group
                    },
                },
                c => c,
            })
            .collect();
        DiceExpr { terms }
    }

    /// Smallest achievable total.
    pub fn min_total(&self) -> i64 {
        self.bound(true)
    }

    /// Largest achievable total.
    pub fn max_total(&self) -> i64 {
        self.bound(false)
    }

    fn bound(&self, low: bool) -> i64 {
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Constant { sign, value } => sign.apply(value as i64),
                Term::Dice { sign, group } => {
                    let k = group.kept_count() as i64;
                    let (lo, hi) = (k, k * group.sides as i64);
                    match (sign, low) {
                        (Sign::Plus, true) => lo,
                        (Sign::Plus, false) => hi,
                        (Sign::Minus, true) => -hi,
                        (Sign::Minus, false) => -lo,
                    }
                }
            })
            .sum()
    }
}

impl fmt::Display for DiceExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, term) in self.terms.iter().enumerate() {
            let sign = term.sign();
            if i == 0 {
                if sign == Sign::Minus {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {} ", sign.symbol())?;
            }
            match term {
                Term::Dice { group, .. } => write!(f, "{group}")?,
                Term::Constant { value, .. } => write!(f, "{value}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for DiceExpr {
    type Err = DiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_dice(s)
    }
}

impl Serialize for DiceExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DiceExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_dice(&s).map_err(serde::de::Error::custom)
    }
}

fn validate_group(g: &DieGroup, position: usize) -> Result<(), DiceError> {
    if g.count == 0 {
        return Err(DiceError::syntax(position, "dice count must be at least 1"));
    }
    if g.count > MAX_DICE_PER_GROUP {
        return Err(DiceError::syntax(
            position,
            format!("at most {MAX_DICE_PER_GROUP} dice per group"),
        ));
    }
    if g.sides < 2 {
        return Err(DiceError::syntax(position, "dice need at least 2 sides"));
    }
    if g.sides > MAX_SIDES {
        return Err(DiceError::syntax(
            position,
            format!("at most {MAX_SIDES} sides"),
        ));
    }
    if let Some(k) = g.keep {
        if k.n == 0 {
            return Err(DiceError::syntax(position, "keep count must be at least 1"));
        }
        if k.n > g.count {
            return Err(DiceError::syntax(
                position,
                format!("cannot keep {} of {} dice", k.n, g.count),
            ));
        }
    }
    Ok(())
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    idx: usize,
    src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        let chars = src
            .char_indices()
            .filter(|(_, c)| !c.is_whitespace())
            .collect();
        Cursor { chars, idx: 0, src }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).map(|&(_, c)| c.to_ascii_lowercase())
    }

    fn pos(&self) -> usize {
        self.chars
            .get(self.idx)
            .map_or(self.src.len(), |&(p, _)| p)
    }

    fn bump(&mut self) {
        self.idx += 1;
    }

    fn number(&mut self) -> Result<Option<u32>, DiceError> {
        let start = self.pos();
        let mut value: Option<u32> = None;
        while let Some(c) = self.peek() {
            let Some(d) = c.to_digit(10) else { break };
            value = Some(
                value
                    .unwrap_or(0)
                    .checked_mul(10)
                    .and_then(|v| v.checked_add(d))
                    .ok_or_else(|| DiceError::syntax(start, "number too large"))?,
            );
            self.bump();
        }
        Ok(value)
    }
}

/// Parses a dice expression such as `2d20kh1 + 1`.
///
/// Whitespace is ignored and `d`/`kh`/`kl` are case-insensitive. A bare `dM`
/// means one die.
pub fn parse_dice(text: &str) -> Result<DiceExpr, DiceError> {
    let mut cur = Cursor::new(text);
    if cur.peek().is_none() {
        return Err(DiceError::syntax(0, "empty expression"));
    }
    let mut terms = Vec::new();
    let mut sign = Sign::Plus;
    // optional leading sign
    match cur.peek() {
        Some('+') => cur.bump(),
        Some('-') => {
            sign = Sign::Minus;
            cur.bump();
        }
        _ => {}
    }
    let mut op_pos: Option<usize> = None;
    loop {
        let start = cur.pos();
        let term = match parse_term(&mut cur, sign)? {
            Some(t) => t,
            None => {
                let (position, message) = match (cur.peek(), op_pos) {
                    (None, Some(p)) => (p, "dangling operator".to_string()),
                    (None, None) => (start, "expected a term".to_string()),
                    (Some(c), _) => (start, format!("unexpected '{c}'")),
                };
                return Err(DiceError::syntax(position, message));
            }
        };
        terms.push(term);
        match cur.peek() {
            None => break,
            Some('+') => {
                op_pos = Some(cur.pos());
                sign = Sign::Plus;
                cur.bump();
            }
            Some('-') => {
                op_pos = Some(cur.pos());
                sign = Sign::Minus;
                cur.bump();
            }
            Some(c) => {
                return Err(DiceError::syntax(cur.pos(), format!("unexpected '{c}'")));
            }
        }
    }
    Ok(DiceExpr { terms })
}

fn parse_term(cur: &mut Cursor<'_>, sign: Sign) -> Result<Option<Term>, DiceError> {
    let start = cur.pos();
    let count = cur.number()?;
    if cur.peek() != Some('d') {
        return Ok(count.map(|value| Term::Constant { sign, value }));
    }
    cur.bump();
    let sides_pos = cur.pos();
    let sides = cur
        .number()?
        .ok_or_else(|| DiceError::syntax(sides_pos, "expected number of sides after 'd'"))?;
    let mut group = DieGroup::new(count.unwrap_or(1), sides);
    if cur.peek() == Some('k') {
        let kpos = cur.pos();
        cur.bump();
        let mode = match cur.peek() {
            Some('h') => KeepMode::Highest,
            Some('l') => KeepMode::Lowest,
            _ => return Err(DiceError::syntax(kpos, "expected 'kh' or 'kl'")),
        };
        cur.bump();
        let npos = cur.pos();
        let n = cur
            .number()?
            .ok_or_else(|| DiceError::syntax(npos, "expected keep count"))?;
        group.keep = Some(KeepRule { mode, n });
    }
    validate_group(&group, start)?;
    Ok(Some(Term::Dice { sign, group }))
}

/// Where die faces come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DieMode {
    /// ChaCha8 stream; `word_pos` is the stream offset so the source can be
    /// serialized mid-session and resumed.
    Seeded { seed: u64, word_pos: u64 },
    Forced { queue: VecDeque<u32> },
}

/// A source of die faces. Every face drawn is also appended to `drawn` so a
/// caller can record exactly what an action consumed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DieSource {
    #[serde(flatten)]
    mode: DieMode,
    #[serde(skip)]
    drawn: Vec<u32>,
}

/// Equality ignores the `drawn` scratch buffer.
impl PartialEq for DieSource {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode
    }
}

impl DieSource {
    pub fn seeded(seed: u64) -> Self {
        DieSource {
            mode: DieMode::Seeded { seed, word_pos: 0 },
            drawn: Vec::new(),
        }
    }

    pub fn forced<I: IntoIterator<Item = u32>>(faces: I) -> Self {
        DieSource {
            mode: DieMode::Forced {
                queue: faces.into_iter().collect(),
            },
            drawn: Vec::new(),
        }
    }

    pub fn mode(&self) -> &DieMode {
        &self.mode
    }

    /// Faces drawn since the last [`DieSource::take_drawn`].
    pub fn drawn(&self) -> &[u32] {
        &self.drawn
    }

    pub fn take_drawn(&mut self) -> Vec<u32> {
        std::mem::take(&mut self.drawn)
    }

    /// Draws one face in `1..=sides`.
    pub fn draw(&mut self, sides: u32) -> Result<u32, DiceError> {
        let face = match &mut self.mode {
            DieMode::Forced { queue } => {
                let face = queue.pop_front().ok_or(DiceError::ForcedSequenceExhausted)?;
                if face == 0 || face > sides {
                    return Err(DiceError::ForcedFaceOutOfRange { face, sides });
                }
                face
            }
            DieMode::Seeded { seed, word_pos } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_word_pos(*word_pos as u128);
                let face = uniform(&mut rng, sides);
                *word_pos = rng.get_word_pos() as u64;
                face
            }
        };
        self.drawn.push(face);
        Ok(face)
    }
}

/// Unbiased draw in `1..=sides` by rejection on 32-bit words.
fn uniform(rng: &mut ChaCha8Rng, sides: u32) -> u32 {
    let sides = sides as u64;
    let zone = (1u64 << 32) - ((1u64 << 32) % sides);
    loop {
        let v = rng.next_u32() as u64;
        if v < zone {
            return (v % sides) as u32 + 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRoll {
    /// Every face rolled, in roll order.
    pub raw: Vec<u32>,
    /// Faces that count toward the total, in roll order.
    pub kept: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollResult {
    pub expr: DiceExpr,
    /// One entry per dice group, in expression order.
    pub groups: Vec<GroupRoll>,
    pub total: i64,
}

impl RollResult {
    /// Kept face of the first group when it contributes exactly one die
    /// (the natural d20 of an attack or save).
    pub fn natural(&self) -> Option<u32> {
        match self.groups.first() {
            Some(g) if g.kept.len() == 1 => Some(g.kept[0]),
            _ => None,
        }
    }
}

fn kept_faces(raw: &[u32], keep: Option<KeepRule>) -> Vec<u32> {
    let Some(rule) = keep else {
        return raw.to_vec();
    };
    // Stable ordering: ties resolved toward earlier dice.
    let mut idx: Vec<usize> = (0..raw.len()).collect();
    match rule.mode {
        KeepMode::Highest => idx.sort_by(|&a, &b| raw[b].cmp(&raw[a]).then(a.cmp(&b))),
        KeepMode::Lowest => idx.sort_by(|&a, &b| raw[a].cmp(&raw[b]).then(a.cmp(&b))),
    }
    let mut chosen: Vec<usize> = idx.into_iter().take(rule.n as usize).collect();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| raw[i]).collect()
}

/// Rolls `expr`, drawing faces group by group from left to right.
pub fn roll(expr: &DiceExpr, src: &mut DieSource) -> Result<RollResult, DiceError> {
    let mut groups = Vec::new();
    let mut total = 0i64;
    for term in &expr.terms {
        match *term {
            Term::Constant { sign, value } => total += sign.apply(value as i64),
            Term::Dice { sign, group } => {
                let raw = (0..group.count)
                    .map(|_| src.draw(group.sides))
                    .collect::<Result<Vec<_>, _>>()?;
                let kept = kept_faces(&raw, group.keep);
                total += sign.apply(kept.iter().map(|&f| f as i64).sum());
                groups.push(GroupRoll { raw, kept });
            }
        }
    }
    Ok(RollResult {
        expr: expr.clone(),
        groups,
        total,
    })
}

/// Renders a roll as `2d20kh1 (15, 12) + 1 = 16`.
///
/// Every rolled face is listed, dropped ones included. Zero constants are
/// omitted.
pub fn format_roll(r: &RollResult) -> String {
    let mut out = String::new();
    let mut groups = r.groups.iter();
    let mut first = true;
    for term in &r.expr.terms {
        if let Term::Constant { value: 0, .. } = term {
            continue;
        }
        let sign = term.sign();
        if first {
            if sign == Sign::Minus {
                out.push('-');
            }
        } else {
            out.push(' ');
            out.push(sign.symbol());
            out.push(' ');
        }
        first = false;
        match term {
            Term::Constant { value, .. } => out.push_str(&value.to_string()),
            Term::Dice { group, .. } => {
                out.push_str(&group.to_string());
                let faces = groups
                    .next()
                    .map(|g| {
                        g.raw
                            .iter()
                            .map(u32::to_string)
                            .collect::<Vec<_>>()
                            .join(", ")
                    })
                    .unwrap_or_default();
                out.push_str(" (");
                out.push_str(&faces);
                out.push(')');
            }
        }
    }
    if first {
        out.push('0');
    }
    out.push_str(" = ");
    out.push_str(&r.total.to_string());
    out
}
