//! Durable signal store on an embedded key-value database. Bundles are keyed
//! by bundle id; ratings by signal id; sessions by session id. Values are
//! JSON. redb serializes write transactions and allows concurrent readers.

use std::path::Path;

use chrono::{DateTime, Utc};
use redb::{Database, ReadableDatabase, ReadableTable, TableDefinition};
use serde::{Deserialize, Serialize};
use sigsynth_core::domain::{ProblemSpec, SignalModality};
use sigsynth_core::metrics::Rating;
use sigsynth_core::pipeline::{SessionRecord, SignalBundle};

use crate::ServiceError;

const BUNDLES: TableDefinition<&str, &[u8]> = TableDefinition::new("bundles");
const RATINGS: TableDefinition<&str, &[u8]> = TableDefinition::new("ratings");
const SESSIONS: TableDefinition<&str, &[u8]> = TableDefinition::new("sessions");

/// Gallery row: enough to list and pick a bundle without loading SVG text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub id: String,
    pub spec: ProblemSpec,
    pub modality: SignalModality,
    pub temperature: f64,
    pub created_at: DateTime<Utc>,
    pub complete: bool,
    pub ratings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreExport {
    pub bundles: Vec<SignalBundle>,
    pub ratings: Vec<Rating>,
    pub sessions: Vec<SessionRecord>,
}

pub struct SignalStore {
    db: Database,
}

fn store_err(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Store(e.to_string())
}

fn decode<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(bytes).map_err(store_err)
}

fn encode<T: Serialize>(value: &T) -> Result<Vec<u8>, ServiceError> {
    serde_json::to_vec(value).map_err(store_err)
}

impl SignalStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(store_err)?;
        }
        let db = Database::create(path).map_err(|e| ServiceError::Store(format!("{}: {e}", path.display())))?;
        // Tables exist from the start so readers never see a missing table.
        let tx = db.begin_write().map_err(store_err)?;
        tx.open_table(BUNDLES).map_err(store_err)?;
        tx.open_table(RATINGS).map_err(store_err)?;
        tx.open_table(SESSIONS).map_err(store_err)?;
        tx.commit().map_err(store_err)?;
        Ok(Self { db })
    }

    /// Inserts or replaces the bundle under its id.
    pub fn put_bundle(&self, bundle: &SignalBundle) -> Result<(), ServiceError> {
        let value = encode(bundle)?;
        let tx = self.db.begin_write().map_err(store_err)?;
        tx.open_table(BUNDLES).map_err(store_err)?.insert(bundle.id.as_str(), value.as_slice()).map_err(store_err)?;
        tx.commit().map_err(store_err)
    }

    pub fn get_bundle(&self, id: &str) -> Result<Option<SignalBundle>, ServiceError> {
        let tx = self.db.begin_read().map_err(store_err)?;
        let table = tx.open_table(BUNDLES).map_err(store_err)?;
        match table.get(id).map_err(store_err)? {
            Some(v) => Ok(Some(decode(v.value())?)),
            None => Ok(None),
        }
    }

    pub fn contains(&self, id: &str) -> Result<bool, ServiceError> {
        let tx = self.db.begin_read().map_err(store_err)?;
        let table = tx.open_table(BUNDLES).map_err(store_err)?;
        Ok(table.get(id).map_err(store_err)?.is_some())
    }

    pub fn bundles(&self) -> Result<Vec<SignalBundle>, ServiceError> {
        let tx = self.db.begin_read().map_err(store_err)?;
        let table = tx.open_table(BUNDLES).map_err(store_err)?;
        let mut out = Vec::new();
        for row in table.iter().map_err(store_err)? {
            let (_, v) = row.map_err(store_err)?;
            out.push(decode(v.value())?);
        }
        Ok(out)
    }

    /// Newest first, ties broken by id; at most `limit` rows.
    pub fn list(&self, limit: usize) -> Result<Vec<BundleSummary>, ServiceError> {
        let mut rows: Vec<BundleSummary> = Vec::new();
        for b in self.bundles()? {
            rows.push(BundleSummary {
                ratings: self.ratings(&b.id)?.len(),
                complete: b.is_complete(),
                id: b.id,
                spec: b.spec,
                modality: b.modality,
                temperature: b.temperature,
                created_at: b.created_at,
            });
        }
        rows.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| a.id.cmp(&b.id)));
        rows.truncate(limit);
        Ok(rows)
    }

    /// Appends a rating to the signal's list. Callers check the signal
    /// exists; the read-modify-write runs inside one write transaction.
    pub fn add_rating(&self, rating: &Rating) -> Result<usize, ServiceError> {
        let tx = self.db.begin_write().map_err(store_err)?;
        let count = {
            let mut table = tx.open_table(RATINGS).map_err(store_err)?;
            let mut list: Vec<Rating> = match table.get(rating.signal_id.as_str()).map_err(store_err)? {
                Some(v) => decode(v.value())?,
                None => Vec::new(),
            };
            list.push(rating.clone());
            let value = encode(&list)?;
            table.insert(rating.signal_id.as_str(), value.as_slice()).map_err(store_err)?;
            list.len()
        };
        tx.commit().map_err(store_err)?;
        Ok(count)
    }

    pub fn ratings(&self, signal_id: &str) -> Result<Vec<Rating>, ServiceError> {
        let tx = self.db.begin_read().map_err(store_err)?;
        let table = tx.open_table(RATINGS).map_err(store_err)?;
        match table.get(signal_id).map_err(store_err)? {
            Some(v) => decode(v.value()),
            None => Ok(Vec::new()),
        }
    }

    pub fn all_ratings(&self) -> Result<Vec<Rating>, ServiceError> {
        let tx = self.db.begin_read().map_err(store_err)?;
        let table = tx.open_table(RATINGS).map_err(store_err)?;
        let mut out = Vec::new();
        for row in table.iter().map_err(store_err)? {
            let (_, v) = row.map_err(store_err)?;
            out.extend(decode::<Vec<Rating>>(v.value())?);
        }
        Ok(out)
    }

    /// Appends a rating to a session, creating the session on first use.
    pub fn add_session_rating(&self, session_id: &str, participant_label: &str, rating: &Rating) -> Result<(), ServiceError> {
        let tx = self.db.begin_write().map_err(store_err)?;
        {
            let mut table = tx.open_table(SESSIONS).map_err(store_err)?;
            let mut record: SessionRecord = match table.get(session_id).map_err(store_err)? {
                Some(v) => decode(v.value())?,
                None => SessionRecord {
                    session_id: session_id.to_string(),
                    participant_label: participant_label.to_string(),
                    trials: Vec::new(),
                    ratings: Vec::new(),
                },
            };
            record.ratings.push(rating.clone());
            let value = encode(&record)?;
            table.insert(session_id, value.as_slice()).map_err(store_err)?;
        }
        tx.commit().map_err(store_err)
    }

    pub fn put_session(&self, record: &SessionRecord) -> Result<(), ServiceError> {
        let value = encode(record)?;
        let tx = self.db.begin_write().map_err(store_err)?;
        tx.open_table(SESSIONS).map_err(store_err)?.insert(record.session_id.as_str(), value.as_slice()).map_err(store_err)?;
        tx.commit().map_err(store_err)
    }

    pub fn get_session(&self, session_id: &str) -> Result<Option<SessionRecord>, ServiceError> {
        let tx = self.db.begin_read().map_err(store_err)?;
        let table = tx.open_table(SESSIONS).map_err(store_err)?;
        match table.get(session_id).map_err(store_err)? {
            Some(v) => Ok(Some(decode(v.value())?)),
            None => Ok(None),
        }
    }

    pub fn sessions(&self) -> Result<Vec<SessionRecord>, ServiceError> {
        let tx = self.db.begin_read().map_err(store_err)?;
        let table = tx.open_table(SESSIONS).map_err(store_err)?;
        let mut out = Vec::new();
        for row in table.iter().map_err(store_err)? {
            let (_, v) = row.map_err(store_err)?;
            out.push(decode(v.value())?);
        }
        Ok(out)
    }

    /// Everything in the store, in key order.
    pub fn export(&self) -> Result<StoreExport, ServiceError> {
        Ok(StoreExport { bundles: self.bundles()?, ratings: self.all_ratings()?, sessions: self.sessions()? })
    }
}
