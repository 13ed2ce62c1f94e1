//! Forward passes of both families on the autodiff tape, and the decoding
//! loop they share (teacher forcing, forced scoring and greedy search).

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DecodeOptions, Model, ModelConfig, ModelError, ModelFamily, Vocabulary, COUNT_BUCKETS};
use crate::data::Example;
use crate::graphworld::{action_space, execute, valid_actions, ActionType, GroundedAction, WorldGraph};
use crate::numerics::{log_softmax, Gradients, Graph, ParamId, ParameterStore, Var};

const STOP_TYPE: usize = ActionType::ALL.len();

pub(crate) fn init_parameters(
    config: &ModelConfig,
    vocab: &Vocabulary,
    atomic: usize,
    rng: &mut impl Rng,
) -> ParameterStore {
    let (e, h, c) = (config.hyper.embedding, config.hyper.hidden, config.hyper.context);
    let scale = config.hyper.init_scale;
    let mut s = ParameterStore::new();
    let mut w = |s: &mut ParameterStore, name: &str, shape: &[usize]| {
        if name.ends_with("bias") {
            s.add_zeros(name, shape);
        } else {
            s.add_uniform(name, shape, scale, rng);
        }
    };
    w(&mut s, "embed.word", &[vocab.words().len(), e]);
    for dir in ["fwd", "bwd"] {
        w(&mut s, &format!("encoder.{dir}.input"), &[3 * h, e]);
        w(&mut s, &format!("encoder.{dir}.recurrent"), &[3 * h, h]);
        w(&mut s, &format!("encoder.{dir}.bias"), &[3 * h]);
    }
    match config.family {
        ModelFamily::AcSeq2seq => {
            if !config.tie_embeddings {
                w(&mut s, "embed.arg", &[vocab.entities().len() + 1, e]);
            }
            w(&mut s, "ac.type", &[STOP_TYPE + 1, e]);
            w(&mut s, "ac.query", &[2 * h, e]);
            w(&mut s, "ac.count1", &[COUNT_BUCKETS, c]);
            w(&mut s, "ac.count2", &[COUNT_BUCKETS, c]);
            w(&mut s, "ac.location", &[vocab.locations().len() + 1, c]);
            for (block, width) in [("type", e), ("arg1", e), ("arg2", e), ("att1", 2 * h), ("att2", 2 * h)] {
                w(&mut s, &format!("ac.gru.{block}"), &[3 * h, width]);
            }
            for block in ["count1", "count2", "location"] {
                w(&mut s, &format!("ac.gru.{block}"), &[3 * h, c]);
            }
            w(&mut s, "ac.gru.bias", &[3 * h]);
            w(&mut s, "ac.gru.recurrent", &[3 * h, h]);
            w(&mut s, "ac.init", &[h, 2 * h]);
            w(&mut s, "ac.init.bias", &[h]);
            w(&mut s, "ac.score", &[h]);
        }
        ModelFamily::Seq2seq => {
            // rows: atomic actions, then START
            w(&mut s, "s2s.action", &[atomic + 1, e]);
            w(&mut s, "s2s.gru.input", &[3 * h, e]);
            w(&mut s, "s2s.gru.bias", &[3 * h]);
            w(&mut s, "s2s.gru.recurrent", &[3 * h, h]);
            w(&mut s, "s2s.query", &[2 * h, h]);
            // rows: atomic actions, then STOP
            w(&mut s, "s2s.out", &[atomic + 1, 3 * h]);
            w(&mut s, "s2s.out.bias", &[atomic + 1]);
            w(&mut s, "s2s.init", &[h, 2 * h]);
            w(&mut s, "s2s.init.bias", &[h]);
        }
    }
    s
}

fn id(store: &ParameterStore, name: &str) -> ParamId {
    store.id(name).unwrap_or_else(|| panic!("parameter {name} missing"))
}

/// Per-token encoder states (forward ⊕ backward) and the summary
/// `[forward_last; backward_first]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderOutput {
    pub states: Vec<Vec<f64>>,
    pub summary: Vec<f64>,
}

struct EncoderVars {
    states: Vec<Var>,
    summary: Var,
}

fn encode(g: &mut Graph, tokens: &[usize], hidden: usize) -> EncoderVars {
    let p = g.params();
    let word = id(p, "embed.word");
    let embeds: Vec<Var> = tokens.iter().map(|&t| g.row(word, t)).collect();
    let run = |g: &mut Graph, dir: &str, order: Vec<usize>| -> Vec<Var> {
        let (wi, wb, wr) =
            (id(p, &format!("encoder.{dir}.input")), id(p, &format!("encoder.{dir}.bias")), id(p, &format!("encoder.{dir}.recurrent")));
        let mut h = g.input(vec![0.0; hidden]);
        let mut out = vec![h; tokens.len()];
        for t in order {
            let gi = g.affine(wi, wb, embeds[t]);
            h = g.gru(gi, h, wr);
            out[t] = h;
        }
        out
    };
    let fwd = run(g, "fwd", (0..tokens.len()).collect());
    let bwd = run(g, "bwd", (0..tokens.len()).rev().collect());
    let states = fwd.iter().zip(&bwd).map(|(f, b)| g.concat(&[*f, *b])).collect();
    let summary = g.concat(&[*fwd.last().unwrap(), bwd[0]]);
    EncoderVars { states, summary }
}

pub(crate) fn encoder_states(model: &Model, command: &str) -> Result<Vec<Vec<f64>>, ModelError> {
    let tokens = model.vocab.encode(command);
    if tokens.is_empty() {
        return Err(ModelError::EmptyCommand);
    }
    let mut g = Graph::new(&model.params);
    let enc = encode(&mut g, &tokens, model.config.hyper.hidden);
    Ok(enc.states.iter().map(|v| g.value(*v).to_vec()).collect())
}

impl Model {
    pub fn encoder_output(&self, command: &str) -> Result<EncoderOutput, ModelError> {
        let tokens = self.vocab.encode(command);
        if tokens.is_empty() {
            return Err(ModelError::EmptyCommand);
        }
        let mut g = Graph::new(&self.params);
        let enc = encode(&mut g, &tokens, self.config.hyper.hidden);
        Ok(EncoderOutput {
            states: enc.states.iter().map(|v| g.value(*v).to_vec()).collect(),
            summary: g.value(enc.summary).to_vec(),
        })
    }

    /// `[e_type; e_arg1; e_arg2]` for an AC-Seq2Seq model.
    pub fn action_embedding(&self, action: &GroundedAction) -> Result<Vec<f64>, ModelError> {
        let p = &self.params;
        let ty = p.get(id(p, "ac.type")).row(type_index(Some(action))).to_vec();
        let mut out = ty;
        for arg in [action.arg1(), action.arg2()] {
            let row = self.arg_row(arg).ok_or_else(|| {
                ModelError::Manifest(format!("argument {} is not in the vocabulary", arg.unwrap_or(super::NONE)))
            })?;
            out.extend_from_slice(p.get(row.0).row(row.1));
        }
        Ok(out)
    }

    fn arg_row(&self, arg: Option<&str>) -> Option<(ParamId, usize)> {
        let p = &self.params;
        if self.config.tie_embeddings {
            self.vocab.tied_arg_row(arg).map(|r| (id(p, "embed.word"), r))
        } else {
            self.vocab.entity_id(arg).map(|r| (id(p, "embed.arg"), r))
        }
    }
}

fn type_index(action: Option<&GroundedAction>) -> usize {
    match action {
        None => STOP_TYPE,
        Some(a) => ActionType::ALL.iter().position(|t| *t == a.action_type).unwrap(),
    }
}

/// Decoder-side context of an action at one step: how often each of its
/// arguments occurred in the already-decoded prefix, and where the actor is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionContext {
    pub counts: (usize, usize),
    pub location: String,
}

impl ActionContext {
    pub fn of(action: &GroundedAction, prefix: &[GroundedAction], world: &WorldGraph) -> Self {
        let count = |name: Option<&str>| match name {
            None => 0,
            Some(n) => prefix.iter().flat_map(|p| p.args()).filter(|a| *a == n).count(),
        };
        ActionContext {
            counts: (count(action.arg1()), count(action.arg2())),
            location: world.name(world.actor_location()).to_string(),
        }
    }
}

/// Env at one decoding step: usage counts of every name so far, location row.
#[derive(Clone)]
struct StepEnv {
    counts: BTreeMap<String, usize>,
    location: usize,
}

impl StepEnv {
    fn bucket(&self, name: Option<&str>) -> usize {
        name.and_then(|n| self.counts.get(n)).copied().unwrap_or(0).min(COUNT_BUCKETS - 1)
    }
}

struct AcIds {
    word: ParamId,
    arg: Option<ParamId>,
    ty: ParamId,
    query: ParamId,
    count: [ParamId; 2],
    location: ParamId,
    gru_type: ParamId,
    gru_arg: [ParamId; 2],
    gru_att: [ParamId; 2],
    gru_count: [ParamId; 2],
    gru_location: ParamId,
    gru_bias: ParamId,
    gru_recurrent: ParamId,
    score: ParamId,
}

struct AcState<'m> {
    model: &'m Model,
    ids: AcIds,
    enc: Vec<Var>,
    h0: Var,
    score: Var,
    type_proj: BTreeMap<usize, Var>,
    arg_proj: [BTreeMap<Option<String>, Var>; 2],
    att: BTreeMap<Option<String>, Var>,
    att_proj: [BTreeMap<Option<String>, Var>; 2],
    count_proj: [BTreeMap<usize, Var>; 2],
    location_proj: BTreeMap<usize, Var>,
    chains: BTreeMap<Option<GroundedAction>, (Var, Vec<Var>)>,
    history: Vec<StepEnv>,
}

impl<'m> AcState<'m> {
    fn new(model: &'m Model, g: &mut Graph, enc: &EncoderVars, world: &WorldGraph) -> Self {
        let p = g.params();
        let ids = AcIds {
            word: id(p, "embed.word"),
            arg: p.id("embed.arg"),
            ty: id(p, "ac.type"),
            query: id(p, "ac.query"),
            count: [id(p, "ac.count1"), id(p, "ac.count2")],
            location: id(p, "ac.location"),
            gru_type: id(p, "ac.gru.type"),
            gru_arg: [id(p, "ac.gru.arg1"), id(p, "ac.gru.arg2")],
            gru_att: [id(p, "ac.gru.att1"), id(p, "ac.gru.att2")],
            gru_count: [id(p, "ac.gru.count1"), id(p, "ac.gru.count2")],
            gru_location: id(p, "ac.gru.location"),
            gru_bias: id(p, "ac.gru.bias"),
            gru_recurrent: id(p, "ac.gru.recurrent"),
            score: id(p, "ac.score"),
        };
        let pre = g.affine(id(p, "ac.init"), id(p, "ac.init.bias"), enc.summary);
        let h0 = g.tanh(pre);
        let score = g.param(ids.score);
        let location = model.vocab.location_id(world.name(world.actor_location()));
        AcState {
            model,
            ids,
            enc: enc.states.clone(),
            h0,
            score,
            type_proj: BTreeMap::new(),
            arg_proj: Default::default(),
            att: BTreeMap::new(),
            att_proj: Default::default(),
            count_proj: Default::default(),
            location_proj: BTreeMap::new(),
            chains: BTreeMap::new(),
            history: vec![StepEnv { counts: BTreeMap::new(), location }],
        }
    }

    fn arg_embedding(&self, g: &mut Graph, arg: Option<&str>) -> Var {
        let vocab = &self.model.vocab;
        match self.ids.arg {
            Some(table) => g.row(table, vocab.entity_id(arg).unwrap_or(vocab.entities().len())),
            None => g.row(self.ids.word, vocab.tied_arg_row(arg).unwrap_or(0)),
        }
    }

    fn attended(&mut self, g: &mut Graph, arg: &Option<String>) -> Var {
        if let Some(v) = self.att.get(arg) {
            return *v;
        }
        let e = self.arg_embedding(g, arg.as_deref());
        let q = g.matvec(self.ids.query, e);
        let v = g.attention(q, &self.enc, &self.enc);
        self.att.insert(arg.clone(), v);
        v
    }

    /// Step-independent part of the GRU input projection for `action`.
    fn static_part(&mut self, g: &mut Graph, action: &Option<GroundedAction>) -> Var {
        let t = type_index(action.as_ref());
        let ty = match self.type_proj.get(&t) {
            Some(v) => *v,
            None => {
                let e = g.row(self.ids.ty, t);
                let v = g.matvec(self.ids.gru_type, e);
                self.type_proj.insert(t, v);
                v
            }
        };
        let args: [Option<String>; 2] = match action {
            None => [None, None],
            Some(a) => [a.arg1.clone(), a.arg2.clone()],
        };
        let mut parts = vec![ty];
        for (slot, arg) in args.iter().enumerate() {
            let proj = match self.arg_proj[slot].get(arg) {
                Some(v) => *v,
                None => {
                    let e = self.arg_embedding(g, arg.as_deref());
                    let v = g.matvec(self.ids.gru_arg[slot], e);
                    self.arg_proj[slot].insert(arg.clone(), v);
                    v
                }
            };
            parts.push(proj);
            let att = match self.att_proj[slot].get(arg) {
                Some(v) => *v,
                None => {
                    let a = self.attended(g, arg);
                    let v = g.matvec(self.ids.gru_att[slot], a);
                    self.att_proj[slot].insert(arg.clone(), v);
                    v
                }
            };
            parts.push(att);
        }
        let bias = g.param(self.ids.gru_bias);
        parts.push(bias);
        g.sum(&parts)
    }

    fn count_part(&mut self, g: &mut Graph, slot: usize, bucket: usize) -> Var {
        if let Some(v) = self.count_proj[slot].get(&bucket) {
            return *v;
        }
        let e = g.row(self.ids.count[slot], bucket);
        let v = g.matvec(self.ids.gru_count[slot], e);
        self.count_proj[slot].insert(bucket, v);
        v
    }

    fn location_part(&mut self, g: &mut Graph, location: usize) -> Var {
        if let Some(v) = self.location_proj.get(&location) {
            return *v;
        }
        let e = g.row(self.ids.location, location);
        let v = g.matvec(self.ids.gru_location, e);
        self.location_proj.insert(location, v);
        v
    }

    /// h_{a,j}, extending the action's chain from h0 as far as needed.
    fn hidden(&mut self, g: &mut Graph, action: &Option<GroundedAction>, step: usize) -> Var {
        if !self.chains.contains_key(action) {
            let s = self.static_part(g, action);
            self.chains.insert(action.clone(), (s, vec![self.h0]));
        }
        let ablation = self.model.config.ablation;
        loop {
            let (stat, done) = {
                let (s, hs) = &self.chains[action];
                (*s, hs.len())
            };
            if done > step {
                return self.chains[action].1[step];
            }
            let env = self.history[done - 1].clone();
            let mut parts = vec![stat];
            if !ablation.no_counter {
                let args = [action.as_ref().and_then(|a| a.arg1()), action.as_ref().and_then(|a| a.arg2())];
                for (slot, arg) in args.into_iter().enumerate() {
                    let p = self.count_part(g, slot, env.bucket(arg));
                    parts.push(p);
                }
            }
            if !ablation.no_location {
                let p = self.location_part(g, env.location);
                parts.push(p);
            }
            let gi = g.sum(&parts);
            let prev = *self.chains[action].1.last().unwrap();
            let h = g.gru(gi, prev, self.ids.gru_recurrent);
            self.chains.get_mut(action).unwrap().1.push(h);
        }
    }

    fn logits(&mut self, g: &mut Graph, support: &[GroundedAction], step: usize) -> Var {
        let mut scores = Vec::with_capacity(support.len() + 1);
        for a in support.iter().cloned().map(Some).chain([None]) {
            let h = self.hidden(g, &a, step);
            scores.push(g.dot(self.score, h));
        }
        g.concat(&scores)
    }

    fn advance(&mut self, chosen: &GroundedAction, world_after: &WorldGraph) {
        let mut counts = self.history.last().unwrap().counts.clone();
        for a in chosen.args() {
            *counts.entry(a.to_string()).or_default() += 1;
        }
        let location = self.model.vocab.location_id(world_after.name(world_after.actor_location()));
        self.history.push(StepEnv { counts, location });
    }
}

struct S2sState<'m> {
    model: &'m Model,
    enc: Vec<Var>,
    h: Var,
    pending: Option<Var>,
    prev: usize,
}

impl<'m> S2sState<'m> {
    fn new(model: &'m Model, g: &mut Graph, enc: &EncoderVars) -> Self {
        let p = g.params();
        let pre = g.affine(id(p, "s2s.init"), id(p, "s2s.init.bias"), enc.summary);
        let h = g.tanh(pre);
        S2sState { model, enc: enc.states.clone(), h, pending: None, prev: model.atomic.len() }
    }

    fn index(&self, a: &GroundedAction) -> Option<usize> {
        self.model.atomic.binary_search(a).ok()
    }

    fn logits(&mut self, g: &mut Graph, support: &[GroundedAction]) -> Var {
        let p = g.params();
        let e = g.row(id(p, "s2s.action"), self.prev);
        let gi = g.affine(id(p, "s2s.gru.input"), id(p, "s2s.gru.bias"), e);
        let h = g.gru(gi, self.h, id(p, "s2s.gru.recurrent"));
        self.pending = Some(h);
        let q = g.matvec(id(p, "s2s.query"), h);
        let ctx = g.attention(q, &self.enc, &self.enc);
        let o = g.concat(&[h, ctx]);
        let all = g.affine(id(p, "s2s.out"), id(p, "s2s.out.bias"), o);
        let mut idx: Vec<usize> = support.iter().map(|a| self.index(a).expect("support is within the atomic vocabulary")).collect();
        idx.push(self.model.atomic.len());
        g.gather(all, &idx)
    }

    fn advance(&mut self, chosen: &GroundedAction) {
        self.h = self.pending.take().expect("advance follows logits");
        self.prev = self.index(chosen).expect("chosen action is in the atomic vocabulary");
    }
}

enum Decoder<'m> {
    Ac(AcState<'m>),
    S2s(S2sState<'m>),
}

impl<'m> Decoder<'m> {
    fn start(model: &'m Model, g: &mut Graph, command: &str, world: &WorldGraph) -> Result<Self, ModelError> {
        let tokens = model.vocab.encode(command);
        if tokens.is_empty() {
            return Err(ModelError::EmptyCommand);
        }
        let enc = encode(g, &tokens, model.config.hyper.hidden);
        Ok(match model.config.family {
            ModelFamily::AcSeq2seq => Decoder::Ac(AcState::new(model, g, &enc, world)),
            ModelFamily::Seq2seq => Decoder::S2s(S2sState::new(model, g, &enc)),
        })
    }

    /// Candidate actions at this step, STOP excluded.
    fn support(&self, world: &WorldGraph, constrained: bool) -> Vec<GroundedAction> {
        match self {
            Decoder::Ac(_) => {
                if constrained {
                    valid_actions(world)
                } else {
                    action_space(world)
                }
            }
            Decoder::S2s(s) => {
                if constrained {
                    valid_actions(world).into_iter().filter(|a| s.index(a).is_some()).collect()
                } else {
                    s.model.atomic.clone()
                }
            }
        }
    }

    fn logits(&mut self, g: &mut Graph, support: &[GroundedAction], step: usize) -> Var {
        match self {
            Decoder::Ac(s) => s.logits(g, support, step),
            Decoder::S2s(s) => s.logits(g, support),
        }
    }

    fn advance(&mut self, chosen: &GroundedAction, world_after: &WorldGraph) {
        match self {
            Decoder::Ac(s) => s.advance(chosen, world_after),
            Decoder::S2s(s) => s.advance(chosen),
        }
    }
}

/// Teacher-forced loss Σ_j −log P(y_j) − log P(STOP); accumulates gradients
/// when `grads` is given.
pub(crate) fn example_loss(
    model: &Model,
    params: &ParameterStore,
    example: &Example,
    grads: Option<&mut Gradients>,
) -> Result<f64, ModelError> {
    let mut g = Graph::new(params);
    let mut dec = Decoder::start(model, &mut g, &example.command, &example.world)?;
    let constrained = !model.config.ablation.no_constraint;
    let mut world = example.world.clone();
    let mut terms = Vec::with_capacity(example.actions.len() + 1);
    for step in 0..=example.actions.len() {
        let support = dec.support(&world, constrained);
        let target = match example.actions.get(step) {
            None => support.len(),
            Some(a) => support.iter().position(|s| s == a).ok_or_else(|| ModelError::UnreachableGold {
                action: a.to_string(),
                step: step + 1,
            })?,
        };
        let logits = dec.logits(&mut g, &support, step + 1);
        terms.push(g.neg_log_softmax(logits, target));
        if let Some(a) = example.actions.get(step) {
            world = execute(&world, a).unwrap_or(world);
            dec.advance(a, &world);
        }
    }
    let total = g.sum(&terms);
    if let Some(grads) = grads {
        g.backward(total, grads);
    }
    Ok(g.scalar(total))
}

pub(crate) fn forced_logprob(
    model: &Model,
    params: &ParameterStore,
    command: &str,
    world: &WorldGraph,
    y: &[GroundedAction],
    constrained: bool,
) -> Result<f64, ModelError> {
    let mut g = Graph::new(params);
    let mut dec = Decoder::start(model, &mut g, command, world)?;
    let mut world = world.clone();
    let mut total = 0.0;
    for step in 0..=y.len() {
        let support = dec.support(&world, constrained);
        let target = match y.get(step) {
            None => support.len(),
            Some(a) => match support.iter().position(|s| s == a) {
                Some(i) => i,
                None => return Ok(f64::NEG_INFINITY),
            },
        };
        let logits = dec.logits(&mut g, &support, step + 1);
        total += log_softmax(g.value(logits))[target];
        if let Some(a) = y.get(step) {
            world = execute(&world, a).unwrap_or(world);
            dec.advance(a, &world);
        }
    }
    Ok(total)
}

/// Greedy decoding output plus each step's distribution over its support
/// (`None` is STOP).
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub actions: Vec<GroundedAction>,
    pub steps: Vec<Vec<(Option<GroundedAction>, f64)>>,
}

pub(crate) fn greedy(
    model: &Model,
    params: &ParameterStore,
    command: &str,
    world: &WorldGraph,
    options: DecodeOptions,
) -> Result<Decoded, ModelError> {
    let mut g = Graph::new(params);
    let mut dec = Decoder::start(model, &mut g, command, world)?;
    let mut world = world.clone();
    let mut out = Decoded { actions: Vec::new(), steps: Vec::new() };
    for step in 0..options.max_len {
        let support = dec.support(&world, options.constrained);
        let logits = dec.logits(&mut g, &support, step + 1);
        let probs = crate::numerics::softmax(g.value(logits));
        let mut best = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        out.steps.push(support.iter().cloned().map(Some).chain([None]).zip(probs.iter().copied()).collect());
        let Some(chosen) = support.get(best).cloned() else { break };
        world = execute(&world, &chosen).unwrap_or(world);
        dec.advance(&chosen, &world);
        out.actions.push(chosen);
    }
    Ok(out)
}
