use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{
    sha256_hex, validate_label, Asset, Clip, ClipKind, ClipSource, ContextSummary, HoldingTank, PaperRef, StoreError,
    TankContent, Thread, DERIVED_LABEL_CHARS, UNORGANIZED_ID, UNORGANIZED_LABEL, WORKSPACE_FILE_VERSION,
};
use crate::geometry::PageRect;
use crate::linker::CitationContext;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CommitMode {
    /// New top-level thread with the context clip and the selected references.
    NewThread {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    /// Only the selected references, into an existing thread.
    RefsTo { target: String },
    /// Only the context (or image) as a clip, into an existing thread.
    ClipTo { target: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Workspace {
    pub version: u32,
    pub workspace_id: String,
    pub revision: u64,
    /// Counter behind thread and clip ids.
    pub next_id: u64,
    /// Identity of the paper most recently opened.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_paper: Option<String>,
    pub unorganized: Thread,
    /// Top-level threads in drawer order (Unorganized excluded).
    pub threads: Vec<Thread>,
    #[serde(default)]
    pub tank: HoldingTank,
    #[serde(default)]
    pub contexts: BTreeMap<String, ContextSummary>,
    #[serde(skip)]
    pub assets: BTreeMap<String, Asset>,
}

impl PartialEq for Workspace {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version
            && self.workspace_id == other.workspace_id
            && self.revision == other.revision
            && self.next_id == other.next_id
            && self.current_paper == other.current_paper
            && self.unorganized == other.unorganized
            && self.threads == other.threads
            && self.tank == other.tank
            && self.contexts == other.contexts
            && self.assets == other.assets
    }
}

fn find_in<'a>(list: &'a [Thread], id: &str) -> Option<&'a Thread> {
    for t in list {
        if t.thread_id == id {
            return Some(t);
        }
        if let Some(found) = find_in(&t.children, id) {
            return Some(found);
        }
    }
    None
}

fn find_in_mut<'a>(list: &'a mut [Thread], id: &str) -> Option<&'a mut Thread> {
    for t in list {
        if t.thread_id == id {
            return Some(t);
        }
        if let Some(found) = find_in_mut(&mut t.children, id) {
            return Some(found);
        }
    }
    None
}

fn detach_from(list: &mut Vec<Thread>, id: &str) -> Option<Thread> {
    if let Some(i) = list.iter().position(|t| t.thread_id == id) {
        return Some(list.remove(i));
    }
    list.iter_mut().find_map(|t| detach_from(&mut t.children, id))
}

fn derive_label(text: &str) -> String {
    let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if text.chars().count() <= DERIVED_LABEL_CHARS {
        return text;
    }
    let cut: String = text.chars().take(DERIVED_LABEL_CHARS).collect();
    let cut = match cut.rfind(' ') {
        Some(i) if i > DERIVED_LABEL_CHARS / 2 => &cut[..i],
        _ => &cut[..],
    };
    format!("{}...", cut.trim_end())
}

impl Workspace {
    pub fn new(workspace_id: &str) -> Self {
        Workspace {
            version: WORKSPACE_FILE_VERSION,
            workspace_id: workspace_id.into(),
            revision: 0,
            next_id: 0,
            current_paper: None,
            unorganized: Thread::new(UNORGANIZED_ID, UNORGANIZED_LABEL, 0),
            threads: vec![],
            tank: HoldingTank::default(),
            contexts: BTreeMap::new(),
            assets: BTreeMap::new(),
        }
    }

    // ---- queries ----

    pub fn thread(&self, id: &str) -> Option<&Thread> {
        if id == UNORGANIZED_ID {
            return Some(&self.unorganized);
        }
        find_in(&self.threads, id)
    }

    pub fn thread_mut(&mut self, id: &str) -> Result<&mut Thread, StoreError> {
        if id == UNORGANIZED_ID {
            return Ok(&mut self.unorganized);
        }
        find_in_mut(&mut self.threads, id).ok_or_else(|| StoreError::NoSuchThread(id.into()))
    }

    /// Drawer order: Unorganized, then top-level threads.
    pub fn drawer(&self) -> Vec<&Thread> {
        std::iter::once(&self.unorganized).chain(&self.threads).collect()
    }

    /// Every thread, Unorganized first, then the forest in pre-order.
    pub fn all_threads(&self) -> Vec<(&Thread, usize)> {
        let mut out = vec![(&self.unorganized, 0)];
        for t in &self.threads {
            out.extend(t.walk());
        }
        out
    }

    pub fn parent_of(&self, id: &str) -> Option<&Thread> {
        self.all_threads().into_iter().map(|(t, _)| t).find(|t| t.children.iter().any(|c| c.thread_id == id))
    }

    pub fn clip(&self, clip_id: &str) -> Option<(&Thread, &Clip)> {
        self.all_threads()
            .into_iter()
            .find_map(|(t, _)| t.clips.iter().find(|c| c.clip_id == clip_id).map(|c| (t, c)))
    }

    pub fn contains_paper(&self, identity: &str) -> bool {
        self.all_threads().iter().any(|(t, _)| t.has_paper(identity))
    }

    /// Clips plus papers across the whole workspace.
    pub fn item_count(&self) -> usize {
        self.all_threads().iter().map(|(t, _)| t.clips.len() + t.papers.len()).sum()
    }

    pub fn asset(&self, sha: &str) -> Option<&Asset> {
        self.assets.get(sha)
    }

    // ---- mutation plumbing ----

    /// Runs `f` on a copy at the next revision and commits the copy only on
    /// success. `f` receives the new revision to use as its stamp.
    pub fn apply<T>(&mut self, f: impl FnOnce(&mut Workspace, u64) -> Result<T, StoreError>) -> Result<T, StoreError> {
        let mut next = self.clone();
        next.revision += 1;
        let stamp = next.revision;
        let out = f(&mut next, stamp)?;
        next.normalize();
        *self = next;
        Ok(out)
    }

    fn normalize(&mut self) {
        // Stable, so equal stamps keep their previous relative order.
        self.threads.sort_by_key(|t| std::cmp::Reverse(t.subtree_stamp()));
        let used = self.referenced_assets();
        self.assets.retain(|k, _| used.contains(k));
    }

    pub(crate) fn referenced_assets(&self) -> BTreeSet<String> {
        let mut used: BTreeSet<String> = self
            .all_threads()
            .iter()
            .flat_map(|(t, _)| t.clips.iter().filter_map(|c| c.image_sha256.clone()))
            .collect();
        if let Some(TankContent::Image { image_sha256, .. }) = &self.tank.content {
            used.insert(image_sha256.clone());
        }
        used
    }

    fn fresh_id(&mut self, prefix: char) -> String {
        self.next_id += 1;
        format!("{prefix}{}", self.next_id)
    }

    // ---- holding tank ----

    /// Replaces the tank with `ctx`, every resolved reference selected.
    pub fn tank_load(&mut self, ctx: CitationContext) -> Result<(), StoreError> {
        self.apply(|ws, _| {
            ws.tank = HoldingTank {
                selected: ctx.resolved.iter().map(|r| r.key.clone()).collect(),
                content: Some(TankContent::Context { context: ctx }),
            };
            Ok(())
        })
    }

    pub fn tank_load_image(&mut self, doc_id: &str, rect: PageRect, image: &[u8]) -> Result<String, StoreError> {
        if image.is_empty() {
            return Err(StoreError::InvalidClip("empty image".into()));
        }
        self.apply(|ws, _| {
            let sha = sha256_hex(image);
            ws.assets.insert(sha.clone(), Asset::from(image));
            ws.tank = HoldingTank {
                content: Some(TankContent::Image { doc_id: doc_id.into(), rect, image_sha256: sha.clone() }),
                selected: BTreeSet::new(),
            };
            Ok(sha)
        })
    }

    fn tank_key(&self, key: &str) -> Result<(), StoreError> {
        match self.tank.context() {
            Some(ctx) if ctx.resolved.iter().any(|r| r.key == key) => Ok(()),
            _ => Err(StoreError::NotInTank(key.into())),
        }
    }

    pub fn tank_deselect(&mut self, key: &str) -> Result<(), StoreError> {
        self.tank_key(key)?;
        self.apply(|ws, _| {
            ws.tank.selected.remove(key);
            Ok(())
        })
    }

    pub fn tank_reselect(&mut self, key: &str) -> Result<(), StoreError> {
        self.tank_key(key)?;
        self.apply(|ws, _| {
            ws.tank.selected.insert(key.to_string());
            Ok(())
        })
    }

    pub fn tank_clear(&mut self) -> Result<(), StoreError> {
        self.apply(|ws, _| {
            ws.tank = HoldingTank::default();
            Ok(())
        })
    }

    // ---- commits ----

    /// Files the tank according to `mode` and empties it. Returns the id of
    /// the thread that received the content.
    pub fn commit(&mut self, mode: &CommitMode) -> Result<String, StoreError> {
        self.apply(|ws, stamp| {
            let target = match mode {
                CommitMode::NewThread { label } => {
                    let label = match label.as_deref().map(str::trim).filter(|l| !l.is_empty()) {
                        Some(l) => validate_label(l)?,
                        None => match &ws.tank.content {
                            None => return Err(StoreError::EmptyCommit),
                            Some(TankContent::Context { context }) => validate_label(&derive_label(&context.text))?,
                            Some(TankContent::Image { doc_id, rect, .. }) => {
                                format!("Image from {doc_id} p.{}", rect.page + 1)
                            }
                        },
                    };
                    let id = ws.fresh_id('t');
                    ws.threads.push(Thread::new(&id, &label, stamp));
                    ws.add_clip_from_tank(&id, stamp)?;
                    ws.add_refs_from_tank(&id, stamp)?;
                    id
                }
                CommitMode::RefsTo { target } => {
                    ws.thread_mut(target)?;
                    if ws.tank.selected_refs().is_empty() {
                        return Err(StoreError::EmptyCommit);
                    }
                    ws.add_refs_from_tank(target, stamp)?;
                    target.clone()
                }
                CommitMode::ClipTo { target } => {
                    ws.thread_mut(target)?;
                    if target == UNORGANIZED_ID {
                        return Err(StoreError::UnorganizedRestricted("clips are not allowed".into()));
                    }
                    if ws.tank.is_empty() {
                        return Err(StoreError::EmptyCommit);
                    }
                    ws.add_clip_from_tank(target, stamp)?;
                    target.clone()
                }
            };
            ws.tank = HoldingTank::default();
            Ok(target)
        })
    }

    fn add_clip_from_tank(&mut self, target: &str, stamp: u64) -> Result<(), StoreError> {
        let clip_id = self.fresh_id('c');
        let clip = match &self.tank.content {
            None => return Ok(()),
            Some(TankContent::Context { context }) => {
                if context.text.trim().is_empty() {
                    return Err(StoreError::InvalidClip("context text is empty".into()));
                }
                self.contexts.insert(
                    context.context_id.clone(),
                    ContextSummary { doc_id: context.doc_id.clone(), page: context.page, text: context.text.clone() },
                );
                Clip {
                    clip_id,
                    kind: ClipKind::Text,
                    text: Some(context.text.clone()),
                    image_sha256: None,
                    source: ClipSource {
                        doc_id: context.doc_id.clone(),
                        page: context.page,
                        rects: vec![],
                        sentence_indices: context.context_sentence_indices.clone(),
                    },
                    context_id: Some(context.context_id.clone()),
                    created_at: stamp,
                }
            }
            Some(TankContent::Image { doc_id, rect, image_sha256 }) => Clip {
                clip_id,
                kind: ClipKind::Image,
                text: None,
                image_sha256: Some(image_sha256.clone()),
                source: ClipSource { doc_id: doc_id.clone(), page: rect.page, rects: vec![*rect], sentence_indices: vec![] },
                context_id: None,
                created_at: stamp,
            },
        };
        let t = self.thread_mut(target)?;
        t.clips.push(clip);
        t.last_additive_change = stamp;
        Ok(())
    }

    /// Adds the selected references not already in `target`; returns how
    /// many were added.
    fn add_refs_from_tank(&mut self, target: &str, stamp: u64) -> Result<usize, StoreError> {
        let Some(ctx) = self.tank.context().cloned() else {
            return Ok(0);
        };
        let refs: Vec<PaperRef> = self
            .tank
            .selected_refs()
            .into_iter()
            .filter_map(|r| PaperRef::from_resolved(r, &ctx.context_id))
            .collect();
        if !refs.is_empty() {
            self.contexts.insert(
                ctx.context_id.clone(),
                ContextSummary { doc_id: ctx.doc_id.clone(), page: ctx.page, text: ctx.text.clone() },
            );
        }
        let t = self.thread_mut(target)?;
        let mut added = 0;
        for p in refs {
            let identity = p.identity().expect("filtered above");
            if !t.has_paper(&identity) {
                t.papers.push(p);
                added += 1;
            }
        }
        if added > 0 {
            t.last_additive_change = stamp;
        }
        Ok(added)
    }

    // ---- threads ----

    /// Creates a thread at the top level or under `parent`.
    pub fn create_thread(&mut self, label: &str, parent: Option<&str>) -> Result<String, StoreError> {
        let label = validate_label(label)?;
        self.apply(|ws, stamp| {
            let id = ws.fresh_id('t');
            let thread = Thread::new(&id, &label, stamp);
            match parent {
                None => ws.threads.push(thread),
                Some(UNORGANIZED_ID) => return Err(StoreError::UnorganizedRestricted("no child threads".into())),
                Some(p) => {
                    let parent = ws.thread_mut(p)?;
                    parent.children.push(thread);
                    parent.last_additive_change = stamp;
                }
            }
            Ok(id)
        })
    }

    pub fn rename_thread(&mut self, id: &str, label: &str) -> Result<(), StoreError> {
        if id == UNORGANIZED_ID {
            return Err(StoreError::CannotMoveUnorganized);
        }
        let label = validate_label(label)?;
        self.apply(|ws, _| {
            let t = ws.thread_mut(id)?;
            t.label = label;
            t.embedding = None;
            Ok(())
        })
    }

    /// Deletes a thread and its subtree. Non-empty threads need `confirm`.
    pub fn delete_thread(&mut self, id: &str, confirm: bool) -> Result<Thread, StoreError> {
        if id == UNORGANIZED_ID {
            return Err(StoreError::CannotMoveUnorganized);
        }
        self.apply(|ws, _| {
            let t = ws.thread(id).ok_or_else(|| StoreError::NoSuchThread(id.into()))?;
            if !confirm && !(t.children.is_empty() && t.clips.is_empty() && t.papers.is_empty()) {
                return Err(StoreError::ConfirmationRequired(id.into()));
            }
            Ok(detach_from(&mut ws.threads, id).expect("thread exists"))
        })
    }

    /// Moves a thread under `new_parent`, or to the top level when `None`.
    /// `position` indexes the new parent's children; top-level placement
    /// follows the drawer rule.
    pub fn move_thread(&mut self, id: &str, new_parent: Option<&str>, position: Option<usize>) -> Result<(), StoreError> {
        if id == UNORGANIZED_ID {
            return Err(StoreError::CannotMoveUnorganized);
        }
        if new_parent == Some(UNORGANIZED_ID) {
            return Err(StoreError::UnorganizedRestricted("no child threads".into()));
        }
        self.apply(|ws, _| {
            let node = ws.thread(id).ok_or_else(|| StoreError::NoSuchThread(id.into()))?;
            if let Some(p) = new_parent {
                if ws.thread(p).is_none() {
                    return Err(StoreError::NoSuchThread(p.into()));
                }
                if node.walk().iter().any(|(t, _)| t.thread_id == p) {
                    return Err(StoreError::CycleError { node: id.into(), parent: p.into() });
                }
            }
            let node = detach_from(&mut ws.threads, id).expect("thread exists");
            match new_parent {
                None => ws.threads.push(node),
                Some(p) => {
                    let children = &mut ws.thread_mut(p)?.children;
                    let at = position.unwrap_or(children.len()).min(children.len());
                    children.insert(at, node);
                }
            }
            Ok(())
        })
    }

    // ---- papers ----

    /// Records a newly opened paper: it lands in Unorganized unless already
    /// filed anywhere, and becomes the current paper.
    pub fn register_open_paper(&mut self, paper: PaperRef) -> Result<String, StoreError> {
        let identity = paper.identity().ok_or_else(|| StoreError::InvalidPaper("needs an id or a title".into()))?;
        self.apply(|ws, stamp| {
            if !ws.contains_paper(&identity) {
                ws.unorganized.papers.push(paper);
                ws.unorganized.last_additive_change = stamp;
            }
            ws.current_paper = Some(identity.clone());
            Ok(identity)
        })
    }

    pub fn add_paper(&mut self, thread_id: &str, paper: PaperRef) -> Result<String, StoreError> {
        let identity = paper.identity().ok_or_else(|| StoreError::InvalidPaper("needs an id or a title".into()))?;
        self.apply(|ws, stamp| {
            let t = ws.thread_mut(thread_id)?;
            if t.has_paper(&identity) {
                return Err(StoreError::PaperExists { thread: thread_id.into(), paper: identity });
            }
            t.papers.push(paper);
            t.last_additive_change = stamp;
            Ok(identity)
        })
    }

    pub fn remove_paper(&mut self, thread_id: &str, identity: &str) -> Result<PaperRef, StoreError> {
        self.apply(|ws, _| {
            let t = ws.thread_mut(thread_id)?;
            let i = t
                .papers
                .iter()
                .position(|p| p.identity().as_deref() == Some(identity))
                .ok_or_else(|| StoreError::NoSuchPaper { thread: thread_id.into(), paper: identity.into() })?;
            Ok(t.papers.remove(i))
        })
    }

    /// Moves a paper between threads (including out of Unorganized).
    pub fn move_paper(&mut self, from: &str, identity: &str, to: &str) -> Result<(), StoreError> {
        self.apply(|ws, _| {
            if ws.thread(to).is_none() {
                return Err(StoreError::NoSuchThread(to.into()));
            }
            let src = ws.thread_mut(from)?;
            let i = src
                .papers
                .iter()
                .position(|p| p.identity().as_deref() == Some(identity))
                .ok_or_else(|| StoreError::NoSuchPaper { thread: from.into(), paper: identity.into() })?;
            if from == to {
                return Ok(());
            }
            let paper = src.papers.remove(i);
            let dst = ws.thread_mut(to)?;
            if dst.has_paper(identity) {
                return Err(StoreError::PaperExists { thread: to.into(), paper: identity.into() });
            }
            dst.papers.push(paper);
            Ok(())
        })
    }

    // ---- clips ----

    pub fn edit_clip(&mut self, clip_id: &str, text: &str) -> Result<(), StoreError> {
        if text.trim().is_empty() {
            return Err(StoreError::InvalidClip("text clips cannot be empty".into()));
        }
        self.apply(|ws, _| {
            let thread_id = ws
                .clip(clip_id)
                .map(|(t, _)| t.thread_id.clone())
                .ok_or_else(|| StoreError::NoSuchClip(clip_id.into()))?;
            let clip = ws.thread_mut(&thread_id)?.clips.iter_mut().find(|c| c.clip_id == clip_id).expect("found above");
            if clip.kind != ClipKind::Text {
                return Err(StoreError::InvalidClip("only text clips can be edited".into()));
            }
            clip.text = Some(text.to_string());
            Ok(())
        })
    }

    pub fn delete_clip(&mut self, clip_id: &str) -> Result<Clip, StoreError> {
        self.apply(|ws, _| {
            let thread_id = ws
                .clip(clip_id)
                .map(|(t, _)| t.thread_id.clone())
                .ok_or_else(|| StoreError::NoSuchClip(clip_id.into()))?;
            let t = ws.thread_mut(&thread_id)?;
            let i = t.clips.iter().position(|c| c.clip_id == clip_id).expect("found above");
            Ok(t.clips.remove(i))
        })
    }

    // ---- invariants ----

    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |m: String| Err(StoreError::Invariant(m));
        if self.version != WORKSPACE_FILE_VERSION {
            return bad(format!("unsupported workspace version {}", self.version));
        }
        let u = &self.unorganized;
        if u.thread_id != UNORGANIZED_ID || u.label != UNORGANIZED_LABEL {
            return bad("malformed Unorganized Papers thread".into());
        }
        if !u.children.is_empty() || !u.clips.is_empty() {
            return bad("Unorganized Papers holds only papers".into());
        }

        let mut thread_ids = HashSet::new();
        let mut clip_ids = HashSet::new();
        let mut max_id = 0u64;
        let mut note_id = |id: &str| {
            if let Some(n) = id.get(1..).and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
        };
        for (t, _) in self.all_threads() {
            if !thread_ids.insert(t.thread_id.as_str()) {
                return bad(format!("duplicate thread id `{}`", t.thread_id));
            }
            if t.thread_id != UNORGANIZED_ID {
                note_id(&t.thread_id);
            }
            if validate_label(&t.label).is_err() || t.label != t.label.trim() {
                return bad(format!("thread `{}` has an invalid label", t.thread_id));
            }
            if t.last_additive_change > self.revision {
                return bad(format!("thread `{}` stamped after the current revision", t.thread_id));
            }
            let mut seen = HashSet::new();
            for p in &t.papers {
                let Some(identity) = p.identity() else {
                    return bad(format!("paper without id or title in `{}`", t.thread_id));
                };
                if !seen.insert(identity.clone()) {
                    return bad(format!("duplicate paper `{identity}` in `{}`", t.thread_id));
                }
            }
            for c in &t.clips {
                if !clip_ids.insert(c.clip_id.as_str()) {
                    return bad(format!("duplicate clip id `{}`", c.clip_id));
                }
                note_id(&c.clip_id);
                if c.source.doc_id.is_empty() || c.created_at > self.revision {
                    return bad(format!("clip `{}` has a bad source or timestamp", c.clip_id));
                }
                match c.kind {
                    ClipKind::Text if c.text.as_deref().is_none_or(|s| s.trim().is_empty()) => {
                        return bad(format!("text clip `{}` is empty", c.clip_id));
                    }
                    ClipKind::Image => match &c.image_sha256 {
                        Some(sha) if self.assets.contains_key(sha) => {}
                        _ => return bad(format!("image clip `{}` has no payload", c.clip_id)),
                    },
                    _ => {}
                }
            }
        }
        if max_id > self.next_id {
            return bad("id counter behind existing ids".into());
        }
        if self.threads.windows(2).any(|w| w[0].subtree_stamp() < w[1].subtree_stamp()) {
            return bad("top-level threads out of drawer order".into());
        }
        match &self.tank.content {
            None if !self.tank.selected.is_empty() => return bad("selection in an empty tank".into()),
            Some(TankContent::Context { context }) => {
                let keys: HashSet<&str> = context.resolved.iter().map(|r| r.key.as_str()).collect();
                if let Some(k) = self.tank.selected.iter().find(|k| !keys.contains(k.as_str())) {
                    return bad(format!("selected key `{k}` not in the tank context"));
                }
            }
            Some(TankContent::Image { image_sha256, .. }) => {
                if !self.tank.selected.is_empty() || !self.assets.contains_key(image_sha256) {
                    return bad("malformed image tank".into());
                }
            }
            None => {}
        }
        Ok(())
    }
}
