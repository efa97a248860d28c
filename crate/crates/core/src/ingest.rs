//! MovieLens 1M parsing and utility-matrix construction.
//!
//! The `.dat` files are `::`-separated and ISO-8859-1 encoded. Every parser
//! works on an arbitrary byte stream so it can be fed from files, memory or
//! test fixtures alike.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Read};
use std::path::Path;

use thiserror::Error;

/// Number of genre slots carried by every movie.
pub const GENRE_COUNT: usize = 19;

/// Genre slot order. Slot 0 is reserved for movies without a listed genre;
/// the remaining slots follow the MovieLens README order.
pub const GENRES: [&str; GENRE_COUNT] = [
    "unknown",
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

/// Valid MovieLens 1M age bucket codes.
pub const AGE_BUCKETS: [u8; 7] = [1, 18, 25, 35, 45, 50, 56];

pub const MAX_OCCUPATION: u8 = 20;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed line {0}")]
    MalformedLine(usize),
    #[error("rating out of range on line {0}")]
    OutOfRangeRating(usize),
    #[error("unknown age bucket on line {0}")]
    UnknownAgeBucket(usize),
    #[error("unknown genre `{0}`")]
    UnknownGenre(String),
    #[error("no parseable year in title on line {0}")]
    MalformedTitle(usize),
    #[error("rating references unknown user {0}")]
    DanglingUser(u32),
    #[error("rating references unknown movie {0}")]
    DanglingMovie(u32),
    #[error("malformed violence score file: {0}")]
    MalformedViolence(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatingRecord {
    pub user_id: u32,
    pub movie_id: u32,
    pub rating: u8,
    pub timestamp: i64,
}

impl fmt::Display for RatingRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}::{}::{}::{}",
            self.user_id, self.movie_id, self.rating, self.timestamp
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sex {
    M,
    F,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserProfile {
    pub user_id: u32,
    pub sex: Sex,
    pub age: u8,
    pub occupation: u8,
    pub zip_code: String,
}

impl fmt::Display for UserProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sex = match self.sex {
            Sex::M => "M",
            Sex::F => "F",
        };
        write!(
            f,
            "{}::{}::{}::{}::{}",
            self.user_id, sex, self.age, self.occupation, self.zip_code
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovieDoc {
    pub movie_id: u32,
    pub title: String,
    pub year: i32,
    pub genres: [u8; GENRE_COUNT],
    pub violence: f64,
}

impl MovieDoc {
    /// Renders the movie back into `movies.dat` form, genres in slot order.
    pub fn to_line(&self) -> String {
        let genres: Vec<&str> = self
            .genres
            .iter()
            .enumerate()
            .filter(|(i, &bit)| bit == 1 && *i != 0)
            .map(|(i, _)| GENRES[i])
            .collect();
        format!(
            "{}::{} ({})::{}",
            self.movie_id,
            self.title,
            self.year,
            genres.join("|")
        )
    }
}

/// Decodes ISO-8859-1 bytes. Every byte maps to the code point of the same value.
pub fn decode_latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

fn lines<R: Read>(stream: R) -> impl Iterator<Item = Result<(usize, String)>> {
    let mut reader = std::io::BufReader::new(stream);
    let mut line_no = 0usize;
    std::iter::from_fn(move || {
        let mut buf = Vec::new();
        loop {
            buf.clear();
            match reader.read_until(b'\n', &mut buf) {
                Ok(0) => return None,
                Ok(_) => {
                    line_no += 1;
                    while matches!(buf.last(), Some(b'\n' | b'\r')) {
                        buf.pop();
                    }
                    if buf.is_empty() {
                        continue;
                    }
                    return Some(Ok((line_no, decode_latin1(&buf))));
                }
                Err(e) => return Some(Err(e.into())),
            }
        }
    })
}

fn field<T: std::str::FromStr>(s: &str, line_no: usize) -> Result<T> {
    s.parse().map_err(|_| IngestError::MalformedLine(line_no))
}

/// Parses `UserID::MovieID::Rating::Timestamp` lines.
pub fn parse_ratings<R: Read>(stream: R) -> Result<Vec<RatingRecord>> {
    let mut out = Vec::new();
    for item in lines(stream) {
        let (line_no, line) = item?;
        let parts: Vec<&str> = line.split("::").collect();
        if parts.len() != 4 {
            return Err(IngestError::MalformedLine(line_no));
        }
        let user_id: u32 = field(parts[0], line_no)?;
        let movie_id: u32 = field(parts[1], line_no)?;
        let rating: i64 = field(parts[2], line_no)?;
        let timestamp: i64 = field(parts[3], line_no)?;
        if user_id == 0 || movie_id == 0 {
            return Err(IngestError::MalformedLine(line_no));
        }
        if !(1..=5).contains(&rating) {
            return Err(IngestError::OutOfRangeRating(line_no));
        }
        out.push(RatingRecord {
            user_id,
            movie_id,
            rating: rating as u8,
            timestamp,
        });
    }
    Ok(out)
}

/// Parses `UserID::Gender::Age::Occupation::Zip-code` lines.
pub fn parse_users<R: Read>(stream: R) -> Result<Vec<UserProfile>> {
    let mut out = Vec::new();
    for item in lines(stream) {
        let (line_no, line) = item?;
        let parts: Vec<&str> = line.split("::").collect();
        if parts.len() != 5 {
            return Err(IngestError::MalformedLine(line_no));
        }
        let user_id: u32 = field(parts[0], line_no)?;
        if user_id == 0 {
            return Err(IngestError::MalformedLine(line_no));
        }
        let sex = match parts[1] {
            "M" => Sex::M,
            "F" => Sex::F,
            _ => return Err(IngestError::MalformedLine(line_no)),
        };
        let age: u8 = field(parts[2], line_no)?;
        if !AGE_BUCKETS.contains(&age) {
            return Err(IngestError::UnknownAgeBucket(line_no));
        }
        let occupation: u8 = field(parts[3], line_no)?;
        if occupation > MAX_OCCUPATION {
            return Err(IngestError::MalformedLine(line_no));
        }
        out.push(UserProfile {
            user_id,
            sex,
            age,
            occupation,
            zip_code: parts[4].to_string(),
        });
    }
    Ok(out)
}

/// Splits `Title (Year)` into its parts. The year is the trailing
/// parenthesised group; earlier groups (alternate titles) stay in the title.
fn split_title(raw: &str, line_no: usize) -> Result<(String, i32)> {
    let raw = raw.trim_end();
    let bad = || IngestError::MalformedTitle(line_no);
    let body = raw.strip_suffix(')').ok_or_else(bad)?;
    let open = body.rfind('(').ok_or_else(bad)?;
    let year: i32 = body[open + 1..].trim().parse().map_err(|_| bad())?;
    let title = body[..open].trim_end().to_string();
    Ok((title, year))
}

pub fn genre_slot(name: &str) -> Option<usize> {
    GENRES.iter().position(|g| *g == name)
}

/// Parses `MovieID::Title (Year)::Genre1|Genre2|...` lines. Movies missing
/// from `violence` get a score of 0.0.
pub fn parse_movies<R: Read>(stream: R, violence: &HashMap<u32, f64>) -> Result<Vec<MovieDoc>> {
    let mut out = Vec::new();
    for item in lines(stream) {
        let (line_no, line) = item?;
        let parts: Vec<&str> = line.split("::").collect();
        if parts.len() != 3 {
            return Err(IngestError::MalformedLine(line_no));
        }
        let movie_id: u32 = field(parts[0], line_no)?;
        if movie_id == 0 {
            return Err(IngestError::MalformedLine(line_no));
        }
        let (title, year) = split_title(parts[1], line_no)?;
        let mut genres = [0u8; GENRE_COUNT];
        for name in parts[2].split('|').filter(|g| !g.is_empty()) {
            let slot = genre_slot(name).ok_or_else(|| IngestError::UnknownGenre(name.to_string()))?;
            genres[slot] = 1;
        }
        if genres.iter().all(|&b| b == 0) {
            genres[0] = 1;
        }
        let score = violence.get(&movie_id).copied().unwrap_or(0.0);
        out.push(MovieDoc {
            movie_id,
            title,
            year,
            genres,
            violence: score,
        });
    }
    Ok(out)
}

/// Reads a `movie_id,score` CSV with a mandatory header row.
pub fn parse_violence<R: Read>(stream: R) -> Result<HashMap<u32, f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(stream);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::MalformedViolence(e.to_string()))?
        .clone();
    if headers.len() != 2 {
        return Err(IngestError::MalformedViolence(
            "expected header `movie_id,score`".into(),
        ));
    }
    let mut out = HashMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| IngestError::MalformedViolence(e.to_string()))?;
        let row = i + 2;
        let movie_id: u32 = rec[0]
            .trim()
            .parse()
            .map_err(|_| IngestError::MalformedViolence(format!("bad movie id on row {row}")))?;
        let score: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| IngestError::MalformedViolence(format!("bad score on row {row}")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(IngestError::MalformedViolence(format!(
                "score {score} outside [0,1] on row {row}"
            )));
        }
        out.insert(movie_id, score);
    }
    Ok(out)
}

/// Sparse users x movies rating matrix with dense index remapping.
#[derive(Debug, Clone)]
pub struct UtilityMatrix {
    pub n_users: usize,
    pub n_movies: usize,
    /// `(user_index, movie_index, rating)`, sorted by user then movie.
    entries: Vec<(u32, u32, u8)>,
    pub user_ids: Vec<u32>,
    pub movie_ids: Vec<u32>,
}

impl UtilityMatrix {
    /// Builds a matrix directly from dense-index triples. Duplicates keep the
    /// last occurrence.
    pub fn from_entries(
        n_users: usize,
        n_movies: usize,
        triples: impl IntoIterator<Item = (usize, usize, u8)>,
    ) -> Self {
        let mut map: HashMap<(u32, u32), u8> = HashMap::new();
        for (u, m, r) in triples {
            assert!(u < n_users && m < n_movies, "entry outside matrix bounds");
            assert!((1..=5).contains(&r), "rating outside [1,5]");
            map.insert((u as u32, m as u32), r);
        }
        let mut entries: Vec<(u32, u32, u8)> = map.into_iter().map(|((u, m), r)| (u, m, r)).collect();
        entries.sort_unstable();
        Self {
            n_users,
            n_movies,
            entries,
            user_ids: (1..=n_users as u32).collect(),
            movie_ids: (1..=n_movies as u32).collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, u32, u8)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, user_index: usize, movie_index: usize) -> Option<u8> {
        self.entries
            .binary_search_by(|&(u, m, _)| (u as usize, m as usize).cmp(&(user_index, movie_index)))
            .ok()
            .map(|i| self.entries[i].2)
    }

    pub fn global_mean(&self) -> Option<f64> {
        if self.entries.is_empty() {
            return None;
        }
        let sum: f64 = self.entries.iter().map(|&(_, _, r)| r as f64).sum();
        Some(sum / self.entries.len() as f64)
    }

    pub fn user_index(&self, user_id: u32) -> Option<usize> {
        self.user_ids.binary_search(&user_id).ok()
    }

    pub fn movie_index(&self, movie_id: u32) -> Option<usize> {
        self.movie_ids.binary_search(&movie_id).ok()
    }
}

/// Builds the utility matrix. Users and movies are indexed in ascending raw
/// id order; repeated (user, movie) pairs keep the rating with the latest
/// timestamp (the later record wins a timestamp tie).
pub fn build_utility_matrix(
    ratings: &[RatingRecord],
    users: &[UserProfile],
    movies: &[MovieDoc],
) -> Result<UtilityMatrix> {
    let mut user_ids: Vec<u32> = users.iter().map(|u| u.user_id).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    let mut movie_ids: Vec<u32> = movies.iter().map(|m| m.movie_id).collect();
    movie_ids.sort_unstable();
    movie_ids.dedup();

    let mut latest: HashMap<(u32, u32), (i64, u8)> = HashMap::with_capacity(ratings.len());
    for r in ratings {
        let u = user_ids
            .binary_search(&r.user_id)
            .map_err(|_| IngestError::DanglingUser(r.user_id))?;
        let m = movie_ids
            .binary_search(&r.movie_id)
            .map_err(|_| IngestError::DanglingMovie(r.movie_id))?;
        let slot = latest.entry((u as u32, m as u32)).or_insert((r.timestamp, r.rating));
        if r.timestamp >= slot.0 {
            *slot = (r.timestamp, r.rating);
        }
    }
    let mut entries: Vec<(u32, u32, u8)> = latest.into_iter().map(|((u, m), (_, r))| (u, m, r)).collect();
    entries.sort_unstable();
    Ok(UtilityMatrix {
        n_users: user_ids.len(),
        n_movies: movie_ids.len(),
        entries,
        user_ids,
        movie_ids,
    })
}

/// A parsed MovieLens directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ratings: Vec<RatingRecord>,
    pub users: Vec<UserProfile>,
    pub movies: Vec<MovieDoc>,
}

impl Dataset {
    /// Loads `ratings.dat`, `users.dat` and `movies.dat` from `dir`, plus the
    /// optional violence CSV. Users and movies are returned sorted by id.
    pub fn load(dir: &Path, violence_csv: Option<&Path>) -> Result<Self> {
        let violence = match violence_csv {
            Some(p) => parse_violence(std::fs::File::open(p)?)?,
            None => HashMap::new(),
        };
        let ratings = parse_ratings(std::fs::File::open(dir.join("ratings.dat"))?)?;
        let mut users = parse_users(std::fs::File::open(dir.join("users.dat"))?)?;
        let mut movies = parse_movies(std::fs::File::open(dir.join("movies.dat"))?, &violence)?;
        users.sort_by_key(|u| u.user_id);
        movies.sort_by_key(|m| m.movie_id);
        Ok(Self { ratings, users, movies })
    }

    pub fn utility_matrix(&self) -> Result<UtilityMatrix> {
        build_utility_matrix(&self.ratings, &self.users, &self.movies)
    }
}
