//! Sessions over the core engine, independent of the transport.
//!
//! Each session holds its timeline behind a mutex that is only taken for the
//! pure edit itself. Model calls run on a snapshot with no lock held and
//! commit only if the revision has not moved in the meantime.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::json;

use tableau_core::assist::{self, GoalProposal, Proposals};
use tableau_core::codegen::{self, Call, ProgramReport};
use tableau_core::judge::{self, ErrorReport};
use tableau_core::llm::{self, Provider};
use tableau_core::scene::{self, SceneDoc};
use tableau_core::timeline::{DragOutcome, StepWarning};
use tableau_core::{
    Bundle, Canvas, ChangeSet, EnvState, Environment, Event, Provenance, SessionArchive, Timeline,
};

use crate::error::{ApiError, ErrorCode};

pub struct LoadedBundle {
    pub bundle: Bundle,
    /// Same environment with rasters inlined, for self-contained scenes.
    pub inlined: Environment,
}

impl LoadedBundle {
    pub fn new(bundle: Bundle) -> Self {
        let inlined = bundle.inlined_environment();
        LoadedBundle { bundle, inlined }
    }

    pub fn env(&self) -> &Environment {
        &self.bundle.environment
    }

    pub fn id(&self) -> &str {
        &self.bundle.id
    }
}

#[derive(Debug, Clone)]
struct SessionData {
    timeline: Timeline,
    proposals: Option<Proposals>,
    rejected: BTreeSet<usize>,
}

pub struct Session {
    pub id: String,
    pub bundle: Arc<LoadedBundle>,
    data: Mutex<SessionData>,
}

impl Session {
    fn new(id: String, bundle: Arc<LoadedBundle>, timeline: Timeline) -> Self {
        Session {
            id,
            bundle,
            data: Mutex::new(SessionData {
                timeline,
                proposals: None,
                rejected: BTreeSet::new(),
            }),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, SessionData> {
        // a panic mid-edit never leaves a half-written timeline: edits are
        // computed on copies and swapped in whole
        self.data.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn timeline(&self) -> Timeline {
        self.lock().timeline.clone()
    }

    pub fn revision(&self) -> u64 {
        self.lock().timeline.revision()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepView {
    pub index: usize,
    pub id: u64,
    pub caption: String,
    pub linked: bool,
    pub provenance: Provenance,
    pub change: ChangeSet,
    pub state: EnvState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EnvironmentSummary {
    pub canvas: Canvas,
    pub objects: Vec<String>,
    pub fixtures: BTreeMap<String, Vec<String>>,
    pub manipulable: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub id: String,
    pub bundle: String,
    pub revision: u64,
    pub selected: usize,
    pub environment: EnvironmentSummary,
    pub steps: Vec<StepView>,
    pub warnings: Vec<StepWarning>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposals: Option<ProposalView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProposalView {
    pub revision: u64,
    pub items: Vec<ProposalItem>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProposalItem {
    pub index: usize,
    pub action: String,
    pub change_needed: llm::ChangeNeeded,
    pub change: ChangeSet,
    pub state: EnvState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EditResult {
    pub revision: u64,
    pub selected: usize,
    pub length: usize,
    /// Steps created or updated by the edit.
    pub steps: Vec<StepView>,
}

/// A caption the engine would like generated for a freshly dragged step.
#[derive(Debug, Clone)]
pub struct CaptionRequest {
    pub session: String,
    pub step_id: u64,
    pub prev: EnvState,
    pub state: EnvState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SceneMode {
    #[default]
    Plain,
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TranslatePath {
    #[default]
    Rule,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslateResult {
    pub path: TranslatePath,
    pub program: String,
    pub calls: Vec<Call>,
    pub report: ProgramReport,
}

/// A session named by id, or a whole archive document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArchiveRef {
    Id(String),
    Archive(Box<SessionArchive>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub session: ArchiveRef,
    /// Defaults to the oracle shipped with the session's bundle. An id may
    /// name a session or a bundle.
    #[serde(default)]
    pub oracle: Option<ArchiveRef>,
}

fn step_view(tl: &Timeline, index: usize) -> StepView {
    let s = &tl.steps()[index];
    StepView {
        index,
        id: s.id,
        caption: s.caption.clone(),
        linked: s.linked,
        provenance: s.provenance,
        change: tl.change_at(index).unwrap_or_default(),
        state: s.state.clone(),
    }
}

fn summary(env: &Environment) -> EnvironmentSummary {
    EnvironmentSummary {
        canvas: env.canvas,
        objects: env.objects.keys().cloned().collect(),
        fixtures: env
            .fixtures
            .values()
            .map(|f| (f.name.clone(), f.possible_states.clone()))
            .collect(),
        manipulable: env.goal_locations.keys().cloned().collect(),
    }
}

fn edit_result(tl: &Timeline, indices: impl IntoIterator<Item = usize>) -> EditResult {
    EditResult {
        revision: tl.revision(),
        selected: tl.selected(),
        length: tl.len(),
        steps: indices.into_iter().map(|i| step_view(tl, i)).collect(),
    }
}

pub struct Engine {
    bundles: BTreeMap<String, Arc<LoadedBundle>>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    provider: Arc<dyn Provider>,
    data_dir: Option<PathBuf>,
}

impl Engine {
    pub fn new(
        bundles: impl IntoIterator<Item = Bundle>,
        provider: Arc<dyn Provider>,
        data_dir: Option<PathBuf>,
    ) -> Self {
        let bundles = bundles
            .into_iter()
            .map(|b| (b.id.clone(), Arc::new(LoadedBundle::new(b))))
            .collect();
        let engine = Engine {
            bundles,
            sessions: RwLock::new(HashMap::new()),
            provider,
            data_dir,
        };
        if let Some(dir) = engine.data_dir.clone() {
            engine.load_saved(&dir);
        }
        engine
    }

    /// Restores archives left in the data directory by an earlier run.
    fn load_saved(&self, dir: &Path) {
        let Ok(entries) = std::fs::read_dir(dir) else {
            return;
        };
        for e in entries.flatten() {
            let path = e.path();
            if path.extension().and_then(|x| x.to_str()) != Some("json") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
                continue;
            };
            let restored = std::fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| SessionArchive::from_text(&t).map_err(|e| e.to_string()))
                .and_then(|a| {
                    let b = self.bundle(&a.bundle).map_err(|e| e.to_string())?;
                    let tl = a.to_timeline(b.env()).map_err(|e| e.to_string())?;
                    Ok((b, tl))
                });
            match restored {
                Ok((b, tl)) => {
                    self.write_sessions().insert(id.clone(), Arc::new(Session::new(id, b, tl)));
                }
                Err(err) => tracing::warn!(path = %path.display(), %err, "skipping saved session"),
            }
        }
    }

    pub fn provider(&self) -> Arc<dyn Provider> {
        self.provider.clone()
    }

    pub fn bundle_ids(&self) -> Vec<String> {
        self.bundles.keys().cloned().collect()
    }

    pub fn bundle(&self, id: &str) -> Result<Arc<LoadedBundle>, ApiError> {
        self.bundles
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("bundle", id))
    }

    fn write_sessions(&self) -> std::sync::RwLockWriteGuard<'_, HashMap<String, Arc<Session>>> {
        self.sessions.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    pub fn create_session(&self, bundle: &str) -> Result<Arc<Session>, ApiError> {
        let b = self.bundle(bundle)?;
        let tl = Timeline::new(b.env(), &b.bundle.initial_state)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let s = Arc::new(Session::new(id.clone(), b, tl));
        self.write_sessions().insert(id, s.clone());
        self.persist(&s);
        Ok(s)
    }

    fn persist(&self, s: &Session) {
        let Some(dir) = &self.data_dir else {
            return;
        };
        let text = SessionArchive::from_timeline(s.bundle.id(), &s.timeline()).to_text();
        let path = dir.join(format!("{}.json", s.id));
        let written = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, text));
        if let Err(err) = written {
            tracing::warn!(path = %path.display(), %err, "could not save session");
        }
    }

    pub fn view(&self, s: &Session) -> SessionView {
        let data = s.lock().clone();
        let tl = &data.timeline;
        let proposals = data.proposals.as_ref().map(|p| ProposalView {
            revision: p.revision,
            items: p
                .steps
                .iter()
                .enumerate()
                .filter(|(i, _)| !data.rejected.contains(i))
                .map(|(index, ps)| ProposalItem {
                    index,
                    action: ps.action.clone(),
                    change_needed: ps.change_needed,
                    change: tableau_core::timeline::diff(&tl.selected_step().state, &ps.state)
                        .unwrap_or_default(),
                    state: ps.state.clone(),
                })
                .collect(),
            warnings: p.warnings.clone(),
        });
        SessionView {
            id: s.id.clone(),
            bundle: s.bundle.id().to_string(),
            revision: tl.revision(),
            selected: tl.selected(),
            environment: summary(s.bundle.env()),
            steps: (0..tl.len()).map(|i| step_view(tl, i)).collect(),
            warnings: tl.consistency_warnings(),
            proposals,
        }
    }

    /// Runs `edit` on the current timeline and swaps in the result. Nothing
    /// changes if the revision does not match or the edit fails.
    fn commit<T>(
        &self,
        s: &Session,
        expected: Option<u64>,
        edit: impl FnOnce(&Timeline) -> Result<(Timeline, T), ApiError>,
    ) -> Result<T, ApiError> {
        let out = {
            let mut data = s.lock();
            let current = data.timeline.revision();
            if let Some(e) = expected {
                if e != current {
                    return Err(ApiError::conflict(e, current));
                }
            }
            let (tl, out) = edit(&data.timeline)?;
            data.timeline = tl;
            out
        };
        self.persist(s);
        Ok(out)
    }

    /// Applies one manipulation event. A drag that leaves an uncaptioned
    /// step also returns the caption request for it.
    pub fn apply_event(
        &self,
        s: &Session,
        revision: u64,
        event: &Event,
    ) -> Result<(EditResult, Option<CaptionRequest>), ApiError> {
        let env = s.bundle.env();
        self.commit(s, Some(revision), |tl| {
            let next = match event {
                Event::Drag { object, x, y } => {
                    let pose = tableau_core::Pose::from_f64(*x, *y)
                        .ok_or(tableau_core::EnvError::OutOfBounds { x: *x, y: *y })?;
                    let (next, outcome) = tl.record_drag_to(env, object, pose)?;
                    if outcome == DragOutcome::Unchanged {
                        return Ok((next.clone(), (edit_result(&next, []), None)));
                    }
                    next
                }
                other => tl.apply_event(env, other)?,
            };
            let sel = next.selected();
            let step = next.selected_step();
            let request = (matches!(event, Event::Drag { .. })
                && step.provenance == Provenance::Drag
                && step.caption.is_empty()
                && sel > 0)
                .then(|| CaptionRequest {
                    session: s.id.clone(),
                    step_id: step.id,
                    prev: next.steps()[sel - 1].state.clone(),
                    state: step.state.clone(),
                });
            let changed = if next.revision() == tl.revision() { vec![] } else { vec![sel] };
            let result = edit_result(&next, changed);
            Ok((next, (result, request)))
        })
    }

    /// Asks the model for a caption and fills it in if the step is still
    /// as it was. Failures leave the caption empty.
    pub fn run_caption(&self, req: &CaptionRequest) -> Option<String> {
        let s = self.session(&req.session).ok()?;
        let env = s.bundle.env();
        let caption = match llm::caption_change(self.provider.as_ref(), env, &req.prev, &req.state) {
            Ok(c) => c,
            Err(err) => {
                tracing::warn!(session = %req.session, step = req.step_id, %err, "auto-caption failed");
                return None;
            }
        };
        let filled = {
            let mut data = s.lock();
            let next = data.timeline.fill_caption(req.step_id, &req.state, &caption);
            next.map(|tl| data.timeline = tl).is_some()
        };
        if filled {
            self.persist(&s);
        }
        filled.then_some(caption)
    }

    /// Snapshot for a model call: the timeline, checked against `expected`.
    fn snapshot(&self, s: &Session, expected: Option<u64>) -> Result<Timeline, ApiError> {
        let tl = s.timeline();
        match expected {
            Some(e) if e != tl.revision() => Err(ApiError::conflict(e, tl.revision())),
            _ => Ok(tl),
        }
    }

    /// Edits a caption. A linked edit re-derives the step's state from its
    /// predecessor through the model.
    pub fn edit_caption(
        &self,
        s: &Session,
        index: usize,
        text: &str,
        linked: bool,
        revision: Option<u64>,
    ) -> Result<EditResult, ApiError> {
        let env = s.bundle.env();
        let tl = self.snapshot(s, revision)?;
        tl.step(index)?;
        if index == 0 {
            return Err(tableau_core::TimelineError::CannotEditInitial.into());
        }
        if !linked {
            return self.commit(s, Some(tl.revision()), |tl| {
                let next = tl.set_caption(index, text, false)?;
                let r = edit_result(&next, [index]);
                Ok((next, r))
            });
        }
        let prev = tl.steps()[index - 1].state.clone();
        let edited = llm::instruct(self.provider.as_ref(), env, &prev, text)?;
        let last = edited
            .last()
            .ok_or_else(|| ApiError::validation("the instruction produced no change"))?;
        self.commit(s, Some(tl.revision()), |tl| {
            let next = tl.replace_state(env, index, last.state.clone(), text)?;
            let r = edit_result(&next, [index]);
            Ok((next, r))
        })
    }

    /// Language instruction: classify, edit, and insert the resulting steps
    /// after the selection.
    pub fn instruct(&self, s: &Session, text: &str, revision: Option<u64>) -> Result<EditResult, ApiError> {
        let env = s.bundle.env();
        let tl = self.snapshot(s, revision)?;
        let edited = llm::instruct(self.provider.as_ref(), env, &tl.selected_step().state, text)?;
        let n = edited.len();
        self.commit(s, Some(tl.revision()), |tl| {
            let states = edited.into_iter().map(|e| (e.state, e.caption)).collect();
            let next = tl.insert_generated(env, states, Provenance::Language)?;
            let last = next.selected();
            let r = edit_result(&next, last + 1 - n..=last);
            Ok((next, r))
        })
    }

    pub fn predict(&self, s: &Session) -> Result<ProposalView, ApiError> {
        let tl = s.timeline();
        let p = assist::propose_next_steps(s.bundle.env(), &tl, self.provider.as_ref())?;
        {
            let mut data = s.lock();
            data.proposals = Some(p);
            data.rejected.clear();
        }
        self.view(s)
            .proposals
            .ok_or_else(|| ApiError::new(ErrorCode::Internal, "proposals vanished"))
    }

    pub fn accept_proposal(&self, s: &Session, k: usize) -> Result<EditResult, ApiError> {
        let env = s.bundle.env();
        let out = {
            let mut data = s.lock();
            let Some(p) = data.proposals.clone() else {
                return Err(ApiError::not_found("proposal", &k.to_string()));
            };
            if k >= p.steps.len() || data.rejected.contains(&k) {
                return Err(ApiError::not_found("proposal", &k.to_string()));
            }
            let next = assist::accept_plausible(env, &data.timeline, &p, k)?;
            let r = edit_result(&next, [next.selected()]);
            data.timeline = next;
            data.proposals = None;
            data.rejected.clear();
            r
        };
        self.persist(s);
        Ok(out)
    }

    pub fn reject_proposal(&self, s: &Session, k: usize) -> Result<ProposalView, ApiError> {
        {
            let mut data = s.lock();
            let live = data
                .proposals
                .as_ref()
                .is_some_and(|p| k < p.steps.len() && !data.rejected.contains(&k));
            if !live {
                return Err(ApiError::not_found("proposal", &k.to_string()));
            }
            data.rejected.insert(k);
        }
        self.view(s)
            .proposals
            .ok_or_else(|| ApiError::new(ErrorCode::Internal, "proposals vanished"))
    }

    pub fn goals(&self, s: &Session, object: &str) -> Result<GoalProposal, ApiError> {
        Ok(assist::propose_goals(s.bundle.env(), &s.timeline(), object)?)
    }

    pub fn accept_goal(
        &self,
        s: &Session,
        object: &str,
        index: usize,
        revision: Option<u64>,
    ) -> Result<(EditResult, Option<CaptionRequest>), ApiError> {
        let tl = self.snapshot(s, revision)?;
        let proposal = assist::propose_goals(s.bundle.env(), &tl, object)?;
        let g = proposal.candidates.get(index).ok_or_else(|| {
            ApiError::validation(format!(
                "candidate {index} out of range for {} candidates",
                proposal.candidates.len()
            ))
            .with_detail(json!({ "index": index, "len": proposal.candidates.len() }))
        })?;
        let event = Event::Drag {
            object: object.to_string(),
            x: f64::from(g.x),
            y: f64::from(g.y),
        };
        self.apply_event(s, tl.revision(), &event)
    }

    pub fn scene(
        &self,
        s: &Session,
        index: usize,
        mode: SceneMode,
    ) -> Result<SceneDoc, ApiError> {
        let tl = s.timeline();
        let step = tl.step(index)?;
        let env = &s.bundle.inlined;
        Ok(match mode {
            SceneMode::Plain => scene::compose_scene(env, &step.state)?,
            SceneMode::Diff => scene::compose_diff_scene(env, &step.state, &tl.change_at(index)?)?,
        })
    }

    pub fn translate(&self, s: &Session, path: TranslatePath) -> Result<TranslateResult, ApiError> {
        let env = s.bundle.env();
        let tl = s.timeline();
        let program = match path {
            TranslatePath::Rule => codegen::translate_timeline(env, &tl)?,
            TranslatePath::Llm => codegen::translate_llm(self.provider.as_ref(), env, &tl.states())?,
        };
        let report = codegen::validate_program(env, &tl.states(), &program);
        Ok(TranslateResult {
            path,
            program: codegen::emit(&program),
            calls: program.calls,
            report,
        })
    }

    pub fn archive(&self, s: &Session) -> SessionArchive {
        SessionArchive::from_timeline(s.bundle.id(), &s.timeline())
    }

    /// Replaces the session's timeline with `archive`. The revision never
    /// goes backwards: an older archive is loaded one past the current one.
    pub fn load_archive(&self, s: &Session, archive: &SessionArchive) -> Result<SessionView, ApiError> {
        if archive.bundle != s.bundle.id() {
            return Err(ApiError::validation(format!(
                "archive is for bundle `{}`, session uses `{}`",
                archive.bundle,
                s.bundle.id()
            )));
        }
        self.commit(s, None, |tl| {
            let mut a = archive.clone();
            a.revision = a.revision.max(tl.revision() + 1);
            Ok((a.to_timeline(s.bundle.env())?, ()))
        })?;
        {
            let mut data = s.lock();
            data.proposals = None;
            data.rejected.clear();
        }
        Ok(self.view(s))
    }

    fn resolve(&self, r: &ArchiveRef) -> Result<SessionArchive, ApiError> {
        match r {
            ArchiveRef::Archive(a) => Ok((**a).clone()),
            ArchiveRef::Id(id) => {
                if let Ok(s) = self.session(id) {
                    return Ok(self.archive(&s));
                }
                let b = self
                    .bundles
                    .get(id)
                    .ok_or_else(|| ApiError::not_found("session or bundle", id))?;
                b.bundle
                    .oracle
                    .clone()
                    .ok_or_else(|| ApiError::not_found("oracle for bundle", id))
            }
        }
    }

    pub fn judge(&self, req: &JudgeRequest) -> Result<ErrorReport, ApiError> {
        let participant = self.resolve(&req.session)?;
        let b = self.bundle(&participant.bundle)?;
        let oracle = match &req.oracle {
            Some(r) => self.resolve(r)?,
            None => b
                .bundle
                .oracle
                .clone()
                .ok_or_else(|| ApiError::not_found("oracle for bundle", b.id()))?,
        };
        Ok(judge::judge_archives(b.env(), &participant, &oracle)?)
    }
}
