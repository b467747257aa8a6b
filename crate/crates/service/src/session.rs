//! One live annotation session: the fixed candidate pool, collected labels,
//! round bookkeeping and the current model.
//!
//! The session directory uses the batch run-artifact layout, plus
//! `session.json` and `checkpoints/{latest.bin,model.json}`. `labels.jsonl`
//! doubles as the write-ahead log: a label is appended and synced before it
//! is acknowledged, so replaying the file restores every accepted label.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock, RwLockUpgradableReadGuard, RwLockWriteGuard};
use prefdesign::active::{derive_seed, evaluate, stream};
use prefdesign::artifact::{read_metrics, read_selection, selection_path, MetricsRow, RunWriter, CONFIG_FILE, LABELS_FILE};
use prefdesign::checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
use prefdesign::config::{ExperimentConfig, WorldConfig};
use prefdesign::metrics::TestPromptSet;
use prefdesign::pool::build_pool;
use prefdesign::strategies::{self, SelectionInput};
use prefdesign::train::train;
use prefdesign::types::AnnotatorKind;
use prefdesign::{ComparisonPair, LabeledDataset, PairId, PoolView, PreferenceLabel, RewardModel, TrainConfig};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::api::{
    CreateSessionRequest, LabelAck, LabelSubmission, NextPairsResponse, PairDetail, PairState, PairView, RetrainMode,
    SessionStatus,
};
use crate::error::{ServiceError, ServiceResult};

pub const SESSION_FILE: &str = "session.json";
const MODEL_FILE: &str = "checkpoints/model.json";
const LATEST_CHECKPOINT: &str = "checkpoints/latest.bin";

#[derive(Debug, Serialize, Deserialize)]
struct SessionFile {
    session_id: Uuid,
    seed: u64,
    retrain: RetrainMode,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ModelFile {
    version: u64,
    trained_on: usize,
    round: usize,
}

/// One line of `labels.jsonl`. The first three fields are the batch-run label
/// row, so session logs read back with the same tooling.
#[derive(Debug, Serialize, Deserialize)]
struct WalRow {
    round: usize,
    pair_id: PairId,
    left_preferred: bool,
    nonce: String,
    timestamp: u64,
}

struct ModelSlot {
    version: u64,
    trained_on: usize,
    model: RewardModel,
    /// Features of the whole session pool under `model`; `None` before the
    /// first training.
    view: Option<PoolView>,
    metrics: Option<MetricsRow>,
}

#[derive(Debug, Clone)]
struct QueueEntry {
    pool_index: usize,
    score: f64,
    rank: usize,
}

/// Selected-but-unlabeled pairs of the current round, in rank order.
#[derive(Debug)]
struct Queue {
    round: usize,
    model_version: u64,
    entries: Vec<QueueEntry>,
}

struct State {
    labeled: LabeledDataset,
    outcomes: HashMap<PairId, bool>,
    round: usize,
    in_round: usize,
    queue: Option<Queue>,
    acks: HashMap<String, LabelAck>,
    metrics: Vec<MetricsRow>,
    wal: File,
}

pub struct Session {
    id: Uuid,
    config: ExperimentConfig,
    seed: u64,
    retrain: RetrainMode,
    train: TrainConfig,
    pool: Vec<ComparisonPair>,
    index: HashMap<PairId, usize>,
    test: Option<TestPromptSet>,
    writer: RunWriter,
    /// Label mutations take the write lock; status and cached queue reads
    /// share it.
    state: RwLock<State>,
    /// Swapped atomically when a retrain finishes.
    slot: RwLock<Arc<ModelSlot>>,
    train_lock: Mutex<()>,
    retraining: AtomicUsize,
}

/// The fixed candidate pool of a session (the round-0 pool of its world) and
/// the world's test set.
pub fn session_pool(
    config: &ExperimentConfig,
    seed: u64,
) -> prefdesign::Result<(Vec<ComparisonPair>, Option<TestPromptSet>)> {
    let (items, test) = config.load_world(seed)?;
    let pool = build_pool(&items, &config.pool, &HashSet::new(), derive_seed(seed, 0, stream::POOL))?;
    Ok((pool, test))
}

fn unix_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Rounds the model through the checkpoint encoding so the in-memory model is
/// exactly what a restart will load.
fn quantize(model: &RewardModel) -> prefdesign::Result<RewardModel> {
    let mut buf = Vec::new();
    write_checkpoint(model, &mut buf)?;
    read_checkpoint(buf.as_slice())
}

fn open_wal(dir: &Path) -> std::io::Result<File> {
    OpenOptions::new().create(true).append(true).open(dir.join(LABELS_FILE))
}

impl Session {
    pub fn create(root: &Path, request: CreateSessionRequest) -> ServiceResult<Arc<Self>> {
        let mut config = request.config;
        let seed = request
            .seed
            .or_else(|| config.seeds.first().copied())
            .ok_or_else(|| ServiceError::InvalidConfig("seeds must not be empty".into()))?;
        config.seeds = vec![seed];
        config.sweep = None;
        config.output_dir = None;
        if let WorldConfig::Dataset(d) = &config.world {
            let train = config.resolve(&d.train);
            let test = d.test.as_ref().map(|p| config.resolve(p));
            for path in std::iter::once(&train).chain(test.as_ref()) {
                if !path.is_file() {
                    return Err(ServiceError::DatasetMissing(path.display().to_string()));
                }
            }
            if let WorldConfig::Dataset(d) = &mut config.world {
                d.train = train;
                d.test = test;
            }
        }
        config.validate().map_err(ServiceError::from_setup)?;
        let (pool, test) = session_pool(&config, seed).map_err(ServiceError::from_setup)?;
        if pool.len() < config.batch_size {
            return Err(ServiceError::InvalidConfig(format!(
                "pool has {} pairs, fewer than batch_size {}",
                pool.len(),
                config.batch_size
            )));
        }

        let id = Uuid::new_v4();
        let dir = root.join(id.to_string());
        let writer = RunWriter::create(&dir, &config.to_toml_string()?)?;
        writer.write_metrics(&[])?;
        fs::write(
            dir.join(SESSION_FILE),
            serde_json::to_vec_pretty(&SessionFile {
                session_id: id,
                seed,
                retrain: request.retrain,
            })
            .map_err(|e| ServiceError::Corrupt(e.to_string()))?,
        )?;
        let wal = open_wal(&dir)?;
        let session = Self::assemble(id, config, seed, request.retrain, pool, test, writer, wal, None, Vec::new())?;
        {
            let mut st = session.state.write();
            let queue = session.build_queue(&st)?;
            st.queue = Some(queue);
        }
        tracing::info!(%id, pool = session.pool.len(), "session created");
        Ok(Arc::new(session))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        id: Uuid,
        config: ExperimentConfig,
        seed: u64,
        retrain: RetrainMode,
        pool: Vec<ComparisonPair>,
        test: Option<TestPromptSet>,
        writer: RunWriter,
        wal: File,
        slot: Option<ModelSlot>,
        metrics: Vec<MetricsRow>,
    ) -> ServiceResult<Self> {
        let train = config.train_config();
        let index = pool.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
        let dim = pool.first().map(|p| p.dim()).unwrap_or(0);
        let slot = slot.unwrap_or_else(|| ModelSlot {
            version: 0,
            trained_on: 0,
            model: RewardModel::zeros(dim, train.hidden),
            view: None,
            metrics: None,
        });
        Ok(Self {
            id,
            config,
            seed,
            retrain,
            train,
            pool,
            index,
            test,
            writer,
            state: RwLock::new(State {
                labeled: LabeledDataset::new(),
                outcomes: HashMap::new(),
                round: 0,
                in_round: 0,
                queue: None,
                acks: HashMap::new(),
                metrics,
                wal,
            }),
            slot: RwLock::new(Arc::new(slot)),
            train_lock: Mutex::new(()),
            retraining: AtomicUsize::new(0),
        })
    }

    /// Restores a session from its directory, replaying the label log and
    /// retraining any round-close model that was lost.
    pub fn open(dir: &Path) -> ServiceResult<Arc<Self>> {
        let file: SessionFile = serde_json::from_slice(&fs::read(dir.join(SESSION_FILE))?)
            .map_err(|e| ServiceError::Corrupt(format!("{SESSION_FILE}: {e}")))?;
        let config = ExperimentConfig::load(&dir.join(CONFIG_FILE)).map_err(ServiceError::from_setup)?;
        let (pool, test) = session_pool(&config, file.seed).map_err(ServiceError::from_setup)?;
        let rows = read_wal(&dir.join(LABELS_FILE))?;

        let model_file: Option<ModelFile> = match fs::read(dir.join(MODEL_FILE)) {
            Ok(bytes) => Some(serde_json::from_slice(&bytes).map_err(|e| ServiceError::Corrupt(e.to_string()))?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        let slot = match model_file {
            Some(mf) if dir.join(LATEST_CHECKPOINT).is_file() => {
                let model = load_checkpoint(&dir.join(LATEST_CHECKPOINT))?;
                let view = PoolView::compute(&model, &pool)?;
                let metrics = match &test {
                    Some(t) => Some(evaluate(&model, t, config.best_of_n)?),
                    None => None,
                };
                Some(ModelSlot {
                    version: mf.version,
                    trained_on: mf.trained_on,
                    metrics: metrics.map(|m| MetricsRow {
                        round: mf.round,
                        n_labels: mf.trained_on,
                        one_minus_spearman: Some(m.one_minus_spearman),
                        best_of_n: Some(m.best_of_n),
                    }),
                    model,
                    view: Some(view),
                })
            }
            _ => None,
        };
        let metrics = if dir.join(prefdesign::artifact::METRICS_FILE).is_file() {
            read_metrics(dir)?
        } else {
            Vec::new()
        };
        let wal = open_wal(dir)?;
        let session = Self::assemble(
            file.session_id,
            config,
            file.seed,
            file.retrain,
            pool,
            test,
            RunWriter::open(dir),
            wal,
            slot,
            metrics,
        )?;
        let c = session.config.batch_size;

        {
            let mut st = session.state.write();
            for row in rows {
                let &i = session
                    .index
                    .get(&row.pair_id)
                    .ok_or_else(|| ServiceError::Corrupt(format!("label for unknown pair {}", row.pair_id)))?;
                let label = PreferenceLabel {
                    pair_id: row.pair_id,
                    left_preferred: row.left_preferred,
                    annotator: AnnotatorKind::Human,
                    timestamp: row.timestamp,
                };
                st.labeled.push(session.pool[i].clone(), label)?;
                st.outcomes.insert(row.pair_id, row.left_preferred);
                let ack = st.advance(row.pair_id, c);
                st.acks.insert(row.nonce, ack);
            }
        }

        // Retrain the last round-close model if the crash beat it to disk.
        let (closed, data) = {
            let st = session.state.read();
            (st.round, st.labeled.entries()[..st.round * c].to_vec())
        };
        if closed >= 1 && session.slot.read().trained_on < closed * c {
            session.retrain_on(LabeledDataset::from_entries(data)?, closed - 1, true)?;
        }

        {
            let mut st = session.state.write();
            if st.round <= session.config.rounds {
                let path = selection_path(dir, st.round);
                if path.is_file() {
                    let version = session.slot.read().version;
                    let entries = read_selection(dir, st.round)?
                        .into_iter()
                        .filter(|r| !st.labeled.contains(r.pair_id))
                        .map(|r| {
                            let pool_index = *session.index.get(&r.pair_id).ok_or_else(|| {
                                ServiceError::Corrupt(format!("selection lists unknown pair {}", r.pair_id))
                            })?;
                            Ok(QueueEntry {
                                pool_index,
                                score: r.score,
                                rank: r.rank,
                            })
                        })
                        .collect::<ServiceResult<Vec<_>>>()?;
                    let round = st.round;
                    st.queue = Some(Queue {
                        round,
                        model_version: version,
                        entries,
                    });
                } else if st.round == 0 {
                    let queue = session.build_queue(&st)?;
                    st.queue = Some(queue);
                }
            }
        }
        tracing::info!(id = %session.id, labels = session.state.read().labeled.len(), "session recovered");
        Ok(Arc::new(session))
    }

    pub fn id(&self) -> Uuid {
        self.id
    }

    pub fn dir(&self) -> &Path {
        self.writer.dir()
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Model currently used for new selections.
    pub fn current_model(&self) -> (u64, RewardModel) {
        let slot = self.slot.read();
        (slot.version, slot.model.clone())
    }

    pub fn labeled(&self) -> LabeledDataset {
        self.state.read().labeled.clone()
    }

    fn is_complete(&self, st: &State) -> bool {
        st.round > self.config.rounds
    }

    /// Runs the session strategy for the rest of the current round against
    /// the latest model.
    fn build_queue(&self, st: &State) -> ServiceResult<Queue> {
        let budget = self.config.batch_size - st.in_round;
        let remaining: Vec<usize> = (0..self.pool.len())
            .filter(|&i| !st.labeled.contains(self.pool[i].id))
            .collect();
        if remaining.len() < budget {
            return Err(ServiceError::ExhaustedPool {
                available: remaining.len(),
                needed: budget,
            });
        }
        let seed = derive_seed(self.seed, st.round, stream::SELECT);
        let slot = self.slot.read().clone();
        let selection = if st.round == 0 {
            let ids: Vec<PairId> = remaining.iter().map(|&i| self.pool[i].id).collect();
            strategies::select_random(&ids, budget, seed)?
        } else {
            let full = slot
                .view
                .as_ref()
                .ok_or_else(|| ServiceError::Corrupt("no trained model for a strategy round".into()))?;
            let view = full.subset(&remaining);
            let pool: Vec<ComparisonPair> = remaining.iter().map(|&i| self.pool[i].clone()).collect();
            let input = SelectionInput {
                model: &slot.model,
                pool: &pool,
                view: &view,
                past: &st.labeled,
            };
            strategies::select(self.config.strategy, &input, budget, &self.config.params, seed)?
        }
        .with_round(st.round);
        self.writer.write_selection(st.round, &selection)?;
        Ok(Queue {
            round: st.round,
            model_version: slot.version,
            entries: selection
                .selected
                .iter()
                .map(|s| QueueEntry {
                    pool_index: remaining[s.pool_index],
                    score: s.score,
                    rank: s.rank,
                })
                .collect(),
        })
    }

    pub fn next_pairs(&self, k: usize) -> ServiceResult<NextPairsResponse> {
        if k == 0 {
            return Err(ServiceError::BadRequest("k must be at least 1".into()));
        }
        let guard = self.state.upgradable_read();
        if self.is_complete(&guard) {
            return Err(ServiceError::Complete(self.config.rounds));
        }
        let remaining = self.config.batch_size - guard.in_round;
        if k > remaining {
            return Err(ServiceError::BudgetExceeded { requested: k, remaining });
        }
        let guard = if guard.queue.as_ref().is_some_and(|q| q.round == guard.round) {
            guard
        } else {
            // Readers keep going while the queue is computed; only the
            // install takes the write lock.
            let queue = self.build_queue(&guard)?;
            let mut w = RwLockUpgradableReadGuard::upgrade(guard);
            w.queue = Some(queue);
            RwLockWriteGuard::downgrade_to_upgradable(w)
        };
        let queue = guard.queue.as_ref().expect("queue installed above");
        let slot = self.slot.read().clone();
        let pairs = queue
            .entries
            .iter()
            .take(k)
            .map(|e| {
                let pair = &self.pool[e.pool_index];
                PairView {
                    pair_id: pair.id,
                    rank: e.rank,
                    score: e.score,
                    p_left: slot.view.as_ref().map(|v| v.p_hat(e.pool_index)),
                    left: pair.left_meta.clone(),
                    right: pair.right_meta.clone(),
                }
            })
            .collect();
        Ok(NextPairsResponse {
            session_id: self.id,
            round: guard.round,
            model_version: queue.model_version,
            pairs,
        })
    }

    pub fn submit_label(self: &Arc<Self>, sub: LabelSubmission) -> ServiceResult<LabelAck> {
        if sub.outcome > 1 {
            return Err(ServiceError::MalformedOutcome(sub.outcome));
        }
        let c = self.config.batch_size;
        let mut st = self.state.write();
        if let Some(ack) = st.acks.get(&sub.nonce) {
            return Ok(ack.clone());
        }
        let &pool_index = self.index.get(&sub.pair_id).ok_or(ServiceError::UnknownPair(sub.pair_id))?;
        let round = st.round;
        let pos = st
            .queue
            .as_ref()
            .filter(|q| q.round == round)
            .and_then(|q| q.entries.iter().position(|e| e.pool_index == pool_index))
            .ok_or(ServiceError::NotPending(sub.pair_id))?;

        let left_preferred = sub.outcome == 1;
        let row = WalRow {
            round,
            pair_id: sub.pair_id,
            left_preferred,
            nonce: sub.nonce.clone(),
            timestamp: unix_secs(),
        };
        let mut line = serde_json::to_vec(&row).map_err(|e| ServiceError::Corrupt(e.to_string()))?;
        line.push(b'\n');
        st.wal.write_all(&line)?;
        st.wal.sync_data()?;

        st.labeled.push(
            self.pool[pool_index].clone(),
            PreferenceLabel {
                pair_id: sub.pair_id,
                left_preferred,
                annotator: AnnotatorKind::Human,
                timestamp: row.timestamp,
            },
        )?;
        st.outcomes.insert(sub.pair_id, left_preferred);
        if let Some(q) = st.queue.as_mut() {
            q.entries.remove(pos);
        }
        let ack = st.advance(sub.pair_id, c);
        st.acks.insert(sub.nonce, ack.clone());
        let closed = ack.round_closed.then(|| st.labeled.clone());
        drop(st);

        if let Some(data) = closed {
            // The first model is trained inline so strategy rounds always have one.
            if round == 0 || self.retrain == RetrainMode::Sync {
                self.retrain_on(data, round, true)?;
            } else {
                self.retraining.fetch_add(1, Ordering::SeqCst);
                let session = Arc::clone(self);
                std::thread::spawn(move || {
                    if let Err(e) = session.retrain_on(data, round, true) {
                        tracing::error!(id = %session.id, round, error = %e, "background retrain failed");
                    }
                    session.retraining.fetch_sub(1, Ordering::SeqCst);
                });
            }
        }
        Ok(ack)
    }

    /// Retrains on every label collected so far. A no-op when the current
    /// model already saw all of them.
    pub fn retrain_now(&self) -> ServiceResult<SessionStatus> {
        let (data, round) = {
            let st = self.state.read();
            (st.labeled.clone(), st.round)
        };
        if data.is_empty() {
            return Err(ServiceError::BadRequest("no labels to train on".into()));
        }
        if self.slot.read().trained_on < data.len() {
            self.retrain_on(data, round, false)?;
        }
        Ok(self.status())
    }

    /// Trains on `data` with the seed of `round`. Round-close models are also
    /// checkpointed under the round and logged to `metrics.csv`. The live model
    /// is only replaced by one trained on at least as many labels.
    fn retrain_on(&self, data: LabeledDataset, round: usize, round_close: bool) -> ServiceResult<u64> {
        let _serial = self.train_lock.lock();
        let model = quantize(&train(&data, &self.train, derive_seed(self.seed, round, stream::TRAIN))?)?;
        let view = PoolView::compute(&model, &self.pool)?;
        let metrics = match &self.test {
            Some(t) => Some(evaluate(&model, t, self.config.best_of_n)?),
            None => None,
        };
        let row = MetricsRow {
            round,
            n_labels: data.len(),
            one_minus_spearman: metrics.map(|m| m.one_minus_spearman),
            best_of_n: metrics.map(|m| m.best_of_n),
        };
        if round_close {
            self.writer.write_checkpoint(round, &model)?;
            if round >= 1 {
                let mut st = self.state.write();
                st.metrics.retain(|r| r.round != round);
                st.metrics.push(row.clone());
                st.metrics.sort_by_key(|r| r.round);
                self.writer.write_metrics(&st.metrics)?;
            }
        }

        let current = self.slot.read().clone();
        if data.len() < current.trained_on {
            return Ok(current.version);
        }
        let version = current.version + 1;
        save_checkpoint(&model, &self.dir().join(LATEST_CHECKPOINT))?;
        let model_file = ModelFile {
            version,
            trained_on: data.len(),
            round,
        };
        fs::write(
            self.dir().join(MODEL_FILE),
            serde_json::to_vec(&model_file).map_err(|e| ServiceError::Corrupt(e.to_string()))?,
        )?;
        *self.slot.write() = Arc::new(ModelSlot {
            version,
            trained_on: data.len(),
            model,
            view: Some(view),
            metrics: metrics.is_some().then_some(row),
        });
        tracing::info!(id = %self.id, version, labels = data.len(), "model swapped");
        Ok(version)
    }

    pub fn status(&self) -> SessionStatus {
        let st = self.state.read();
        let slot = self.slot.read().clone();
        SessionStatus {
            session_id: self.id,
            round: st.round,
            labels: st.labeled.len(),
            labels_in_round: st.in_round,
            batch_size: self.config.batch_size,
            strategy: self.config.strategy,
            model_version: slot.version,
            pending: st.queue.as_ref().filter(|q| q.round == st.round).map_or(0, |q| q.entries.len()),
            retraining: self.retraining.load(Ordering::SeqCst) > 0,
            complete: self.is_complete(&st),
            metrics: slot.metrics.clone(),
        }
    }

    pub fn pair(&self, id: PairId) -> ServiceResult<PairDetail> {
        let &i = self.index.get(&id).ok_or(ServiceError::UnknownPair(id))?;
        let st = self.state.read();
        let pending = st
            .queue
            .as_ref()
            .filter(|q| q.round == st.round)
            .is_some_and(|q| q.entries.iter().any(|e| e.pool_index == i));
        let outcome = st.outcomes.get(&id).map(|&l| u8::from(l));
        let state = match (outcome, pending) {
            (Some(_), _) => PairState::Labeled,
            (None, true) => PairState::Pending,
            (None, false) => PairState::Available,
        };
        let pair = &self.pool[i];
        Ok(PairDetail {
            pair_id: id,
            state,
            outcome,
            left: pair.left_meta.clone(),
            right: pair.right_meta.clone(),
        })
    }

    /// Blocks until no background retrain is running.
    pub fn wait_idle(&self) {
        while self.retraining.load(Ordering::SeqCst) > 0 {
            std::thread::sleep(std::time::Duration::from_millis(5));
        }
        drop(self.train_lock.lock());
    }
}

impl State {
    /// Counts one accepted label and closes the round when its quota is met.
    fn advance(&mut self, pair_id: PairId, c: usize) -> LabelAck {
        let round = self.round;
        self.in_round += 1;
        let closed = self.in_round == c;
        let in_round = self.in_round;
        if closed {
            self.round += 1;
            self.in_round = 0;
            self.queue = None;
        }
        LabelAck {
            pair_id,
            round,
            labels: self.labeled.len(),
            labels_in_round: in_round,
            round_closed: closed,
            pending: if closed { 0 } else { c - in_round },
        }
    }
}

/// Reads the label log. A torn final line (a crash mid-append, never
/// acknowledged) is dropped and truncated away.
fn read_wal(path: &Path) -> ServiceResult<Vec<WalRow>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut rows = Vec::new();
    let mut offset = 0;
    for chunk in bytes.split_inclusive(|&b| b == b'\n') {
        let complete = chunk.ends_with(b"\n");
        match serde_json::from_slice::<WalRow>(chunk) {
            Ok(row) if complete => rows.push(row),
            _ if offset + chunk.len() == bytes.len() => {
                tracing::warn!(path = %path.display(), "dropping torn label record");
                OpenOptions::new().write(true).open(path)?.set_len(offset as u64)?;
                break;
            }
            Err(e) => return Err(ServiceError::Corrupt(format!("{}: {e}", path.display()))),
            Ok(_) => unreachable!("only the last chunk can lack a newline"),
        }
        offset += chunk.len();
    }
    Ok(rows)
}

/// Directories under `root` that hold a session.
pub fn session_dirs(root: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root)? {
        let path = entry?.path();
        if path.join(SESSION_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}
