//! MovieLens-style rating ingestion, binarisation, per-user train/test
//! splitting and the popularity baseline.
//!
//! Splits are drawn with ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`)
//! and `rand`'s Fisher-Yates shuffle, one shuffle per user in ascending user
//! order, so a seed reproduces the same split on every platform.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CsrrError, Result};
use crate::matrix::ObservationMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatingFormat {
    /// `user<TAB>item<TAB>rating<TAB>timestamp` (MovieLens-100K `u.data`).
    Tab,
    /// `user::item::rating::timestamp` (MovieLens-1M `ratings.dat`).
    DoubleColon,
    /// Tab layout with ratings on `[0, 1]`, rescaled to `1 + 4r`.
    EachMovie,
}

impl FromStr for RatingFormat {
    type Err = CsrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tab" | "ml-100k" => Ok(RatingFormat::Tab),
            "double-colon" | "dcolon" | "ml-1m" => Ok(RatingFormat::DoubleColon),
            "eachmovie" => Ok(RatingFormat::EachMovie),
            other => Err(CsrrError::InvalidConfig(format!(
                "unknown rating format {other:?}"
            ))),
        }
    }
}

impl fmt::Display for RatingFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RatingFormat::Tab => "tab",
            RatingFormat::DoubleColon => "double-colon",
            RatingFormat::EachMovie => "eachmovie",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rating {
    /// Dense user index.
    pub user: usize,
    /// Dense item index.
    pub item: usize,
    pub rating: f64,
    pub timestamp: i64,
}

#[derive(Clone, Debug)]
pub struct RatingDataset {
    pub ratings: Vec<Rating>,
    /// External user id of each dense index, ascending.
    pub user_ids: Vec<u64>,
    /// External item id of each dense index, ascending.
    pub item_ids: Vec<u64>,
    /// Repeated `(user, item)` lines; the last occurrence is kept.
    pub duplicates: usize,
}

impl RatingDataset {
    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    /// Rated fraction of the item × user grid, before binarisation.
    pub fn density(&self) -> f64 {
        self.ratings.len() as f64 / (self.n_users() * self.n_items()) as f64
    }

    pub fn user_index(&self, external: u64) -> Option<usize> {
        self.user_ids.binary_search(&external).ok()
    }

    pub fn item_index(&self, external: u64) -> Option<usize> {
        self.item_ids.binary_search(&external).ok()
    }
}

struct RawRating {
    user: u64,
    item: u64,
    rating: f64,
    timestamp: i64,
}

fn parse_line(line: &str, format: RatingFormat, lineno: usize) -> Result<RawRating> {
    let fields: Vec<&str> = match format {
        RatingFormat::Tab | RatingFormat::EachMovie => line.split('\t').collect(),
        RatingFormat::DoubleColon => line.split("::").collect(),
    };
    let err = |message: String| CsrrError::Parse {
        line: lineno,
        message,
    };
    if fields.len() != 4 {
        return Err(err(format!("expected 4 fields, found {}", fields.len())));
    }
    let user = fields[0]
        .trim()
        .parse::<u64>()
        .map_err(|e| err(format!("bad user id {:?}: {e}", fields[0])))?;
    let item = fields[1]
        .trim()
        .parse::<u64>()
        .map_err(|e| err(format!("bad item id {:?}: {e}", fields[1])))?;
    let mut rating = fields[2]
        .trim()
        .parse::<f64>()
        .map_err(|e| err(format!("bad rating {:?}: {e}", fields[2])))?;
    if !rating.is_finite() {
        return Err(err(format!("non-finite rating {:?}", fields[2])));
    }
    if format == RatingFormat::EachMovie {
        rating = 1.0 + 4.0 * rating;
    }
    let timestamp = fields[3]
        .trim()
        .parse::<i64>()
        .map_err(|e| err(format!("bad timestamp {:?}: {e}", fields[3])))?;
    Ok(RawRating {
        user,
        item,
        rating,
        timestamp,
    })
}

pub fn parse_ratings_from_reader<R: Read>(reader: R, format: RatingFormat) -> Result<RatingDataset> {
    let mut raw: Vec<RawRating> = Vec::new();
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        raw.push(parse_line(line, format, k + 1)?);
    }
    if raw.is_empty() {
        return Err(CsrrError::EmptyDataset);
    }

    let mut user_ids: Vec<u64> = raw.iter().map(|r| r.user).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    let mut item_ids: Vec<u64> = raw.iter().map(|r| r.item).collect();
    item_ids.sort_unstable();
    item_ids.dedup();
    let user_index: HashMap<u64, usize> = user_ids.iter().enumerate().map(|(k, &u)| (u, k)).collect();
    let item_index: HashMap<u64, usize> = item_ids.iter().enumerate().map(|(k, &i)| (i, k)).collect();

    let mut slot: HashMap<(usize, usize), usize> = HashMap::with_capacity(raw.len());
    let mut ratings: Vec<Rating> = Vec::with_capacity(raw.len());
    let mut duplicates = 0;
    for r in raw {
        let rating = Rating {
            user: user_index[&r.user],
            item: item_index[&r.item],
            rating: r.rating,
            timestamp: r.timestamp,
        };
        match slot.get(&(rating.user, rating.item)) {
            Some(&k) => {
                ratings[k] = rating;
                duplicates += 1;
            }
            None => {
                slot.insert((rating.user, rating.item), ratings.len());
                ratings.push(rating);
            }
        }
    }
    Ok(RatingDataset {
        ratings,
        user_ids,
        item_ids,
        duplicates,
    })
}

pub fn parse_ratings(path: impl AsRef<Path>, format: RatingFormat) -> Result<RatingDataset> {
    parse_ratings_from_reader(File::open(path)?, format)
}

/// Items × users observation matrix with positives where `rating > threshold`.
pub fn binarize(ds: &RatingDataset, threshold: f64) -> ObservationMatrix {
    ObservationMatrix::from_positives(
        ds.n_items(),
        ds.n_users(),
        ds.ratings
            .iter()
            .filter(|r| r.rating > threshold)
            .map(|r| (r.item, r.user)),
    )
    .expect("dataset indices are dense and unique")
}

#[derive(Clone, Debug)]
pub struct Split {
    pub train: ObservationMatrix,
    /// Held-out positive items per user, ascending.
    pub test: Vec<Vec<usize>>,
    pub seed: u64,
    pub fraction: f64,
}

impl Split {
    pub fn test_users(&self) -> usize {
        self.test.iter().filter(|t| !t.is_empty()).count()
    }
}

/// Number of training items for a user with `k` positives: `round(fraction·k)`,
/// halves rounded up.
pub fn train_size(k: usize, fraction: f64) -> usize {
    ((fraction * k as f64) + 0.5).floor() as usize
}

/// Per-user uniform random partition of each user's positives.
pub fn split_per_user(a: &ObservationMatrix, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CsrrError::InvalidConfig(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(a.positive_count());
    let mut test = vec![Vec::new(); a.cols()];
    for (user, held_out) in test.iter_mut().enumerate() {
        let mut items = a.column_positives(user);
        if items.len() < 2 {
            train.extend(items.into_iter().map(|i| (i, user)));
            continue;
        }
        items.shuffle(&mut rng);
        let keep = train_size(items.len(), fraction);
        let mut rest = items.split_off(keep);
        rest.sort_unstable();
        train.extend(items.into_iter().map(|i| (i, user)));
        *held_out = rest;
    }
    Ok(Split {
        train: ObservationMatrix::from_positives(a.rows(), a.cols(), train)?,
        test,
        seed,
        fraction,
    })
}

/// Writes the audit manifest of a split: seed, fraction and each user's
/// held-out items. External ids are used when the dataset is supplied.
pub fn write_split_manifest<W: Write>(
    split: &Split,
    dataset: Option<&RatingDataset>,
    mut out: W,
) -> Result<()> {
    writeln!(out, "seed = {}", split.seed)?;
    writeln!(out, "fraction = {}", split.fraction)?;
    writeln!(out, "users = {}", split.test.len())?;
    writeln!(out, "test_users = {}", split.test_users())?;
    for (user, items) in split.test.iter().enumerate() {
        if items.is_empty() {
            continue;
        }
        let (user_id, ids): (u64, Vec<u64>) = match dataset {
            Some(ds) => (
                ds.user_ids[user],
                items.iter().map(|&i| ds.item_ids[i]).collect(),
            ),
            None => (user as u64, items.iter().map(|&i| i as u64).collect()),
        };
        let joined: Vec<String> = ids.iter().map(u64::to_string).collect();
        writeln!(out, "{user_id}: {}", joined.join(" "))?;
    }
    Ok(())
}

/// Reads back the held-out sets of a manifest as external-id lists.
pub fn read_split_manifest<R: Read>(reader: R) -> Result<BTreeMap<u64, Vec<u64>>> {
    let mut out = BTreeMap::new();
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.contains('=') || line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CsrrError::Parse { line: k + 1, message };
        let (user, items) = line
            .split_once(':')
            .ok_or_else(|| err("expected `user: items`".into()))?;
        let user = user.trim().parse::<u64>().map_err(|e| err(e.to_string()))?;
        let items = items
            .split_whitespace()
            .map(|t| t.parse::<u64>().map_err(|e| err(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        out.insert(user, items);
    }
    Ok(out)
}

/// Items by descending positive count, ties by ascending index.
pub fn pop_rank(a: &ObservationMatrix) -> Vec<usize> {
    let counts = a.row_counts();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&x, &y| counts[y].cmp(&counts[x]).then(x.cmp(&y)));
    order
}
