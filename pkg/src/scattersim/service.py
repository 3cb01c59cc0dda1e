"""HTTP API for annotation collection and similarity queries.

Serves stimuli and audio, accepts free-sorting annotations, retrains
per-subject or consensus metrics in the background, and answers ranked
similarity queries for stored clips or uploaded WAV files.

Data directory layout:
    manifest.jsonl      corpus manifest (required)
    store.scf           gaussianized feature store
    gaussianizer.scg    fitted gaussianizer (needed for WAV queries)
    config.ini          run config (or SCATTER_SIM_CONFIG env var)
    metrics/*.scl       metric registry, one file per metric id
    annotations/        durable annotation store (written by the API)

Metrics are served only if their fingerprint matches the loaded store.
"""

import io
import itertools
import json
import os
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse

from .audio import read_wav
from .cli import feature_row
from .config import RunConfig
from .corpus import CANONICAL_STIMULI, Corpus, expand_clusters
from .features import (FeatureStore, Gaussianizer, apply_gaussianizer,
                       build_store)
from .metric import MetricMatrix, train_lmnn
from .perceptual import (Annotation, annotation_to_graph, build_hypergraph,
                         partition_hypergraph)
from .retrieval import evaluate, knn_query


@dataclass
class Job:
    job_id: str
    subject: str
    status: str = "queued"      # queued | running | done | failed
    metric_id: str = ""
    error: str = ""
    report: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"id": self.job_id, "subject": self.subject,
               "status": self.status}
        if self.metric_id:
            out["metric"] = self.metric_id
        if self.error:
            out["error"] = self.error
        if self.report:
            out["report"] = self.report
        return out


class SessionState:
    """Mutable server state: corpus, features, metrics, annotations,
    and the retraining job table.

    Reads take unlocked snapshots of immutable objects; writes swap
    references under a single lock.  At most one retraining job per
    subject runs at a time.
    """

    def __init__(self, data_dir, config_path=None):
        self.data_dir = data_dir
        self.lock = threading.Lock()
        self.jobs = {}
        self.active_subjects = set()
        self._job_counter = itertools.count(1)

        config_path = config_path or os.environ.get("SCATTER_SIM_CONFIG")
        self.config = RunConfig.load(config_path) if config_path \
            else RunConfig()

        manifest = os.path.join(data_dir, "manifest.jsonl")
        self.corpus = Corpus.load_manifest(manifest) \
            if os.path.exists(manifest) else None

        store_path = os.path.join(data_dir, "store.scf")
        self.store = FeatureStore.load(store_path) \
            if os.path.exists(store_path) else None

        gauss_path = os.path.join(data_dir, "gaussianizer.scg")
        self.gaussianizer = Gaussianizer.load(gauss_path) \
            if os.path.exists(gauss_path) else None

        self.metrics = {}
        metrics_dir = os.path.join(data_dir, "metrics")
        if os.path.isdir(metrics_dir):
            for name in sorted(os.listdir(metrics_dir)):
                if not name.endswith(".scl"):
                    continue
                metric = MetricMatrix.load(os.path.join(metrics_dir, name))
                if self.store and \
                        metric.fingerprint == self.store.fingerprint:
                    self.metrics[name[:-4]] = metric

        self.annotations = {}   # subject -> list of Annotation versions
        self._load_annotations()

    # -- annotations ----------------------------------------------------

    def _annotation_dir(self, subject):
        return os.path.join(self.data_dir, "annotations", subject)

    def _load_annotations(self):
        root = os.path.join(self.data_dir, "annotations")
        if not os.path.isdir(root):
            return
        for subject in sorted(os.listdir(root)):
            versions = []
            subj_dir = os.path.join(root, subject)
            for name in sorted(os.listdir(subj_dir)):
                if name.endswith(".json"):
                    with open(os.path.join(subj_dir, name)) as fh:
                        versions.append(Annotation.from_json(fh.read()))
            if versions:
                self.annotations[subject] = versions

    def stimulus_ids(self):
        """Annotation board vertex set: the canonical stimuli when the
        corpus contains them, otherwise every corpus clip."""
        ids = [e.clip_id for e in self.corpus.entries]
        canonical = [c for c in ids if c in set(CANONICAL_STIMULI)]
        return canonical if len(canonical) == len(CANONICAL_STIMULI) \
            else ids

    def store_annotation(self, annotation):
        with self.lock:
            versions = self.annotations.setdefault(annotation.subject, [])
            versions.append(annotation)
            version = len(versions)
        subj_dir = self._annotation_dir(annotation.subject)
        os.makedirs(subj_dir, exist_ok=True)
        path = os.path.join(subj_dir, "v%04d.json" % version)
        with open(path, "w") as fh:
            fh.write(annotation.to_json())
        return "%s/v%04d" % (annotation.subject, version)

    # -- retraining -----------------------------------------------------

    def _training_graph(self, subject):
        stimuli = self.stimulus_ids()
        if subject == "consensus":
            graphs = [annotation_to_graph(v[-1], stimuli)
                      for v in self.annotations.values()]
            h = build_hypergraph(graphs)
            c0 = max(g.n_clusters for g in graphs)
            graph, _ = partition_hypergraph(h, c0, seed=self.config.seed)
        else:
            graph = annotation_to_graph(
                self.annotations[subject][-1], stimuli)
        if set(self.store.clip_ids) <= graph.vertices:
            return graph
        return expand_clusters(graph, self.corpus)

    def start_retrain(self, subject):
        with self.lock:
            if subject in self.active_subjects:
                raise HTTPException(409, "retraining already running for "
                                         "%r" % subject)
            job = Job(job_id="job-%04d" % next(self._job_counter),
                      subject=subject)
            self.jobs[job.job_id] = job
            self.active_subjects.add(subject)
        worker = threading.Thread(target=self._run_retrain, args=(job,),
                                  daemon=True)
        worker.start()
        return job

    def _run_retrain(self, job):
        job.status = "running"
        try:
            graph = self._training_graph(job.subject)
            metric = train_lmnn(self.store, graph, self.config.lmnn,
                                fingerprint=self.store.fingerprint)
            report = evaluate(self.store, metric.matrix,
                              {job.subject: graph}, r=5,
                              provenance={"job": job.job_id})
            metrics_dir = os.path.join(self.data_dir, "metrics")
            os.makedirs(metrics_dir, exist_ok=True)
            metric.save(os.path.join(metrics_dir, job.subject + ".scl"))
            with self.lock:
                self.metrics[job.subject] = metric
            job.metric_id = job.subject
            job.report = json.loads(report.to_json())
            job.status = "done"
        except Exception as exc:                 # surfaced via the job API
            job.error = str(exc)
            job.status = "failed"
        finally:
            with self.lock:
                self.active_subjects.discard(job.subject)

    # -- queries ----------------------------------------------------------

    def metric_for(self, metric_id):
        if metric_id == "identity":
            if self.store is None:
                raise HTTPException(503, "feature store not loaded")
            return MetricMatrix(
                matrix=np.eye(self.store.values.shape[1]),
                fingerprint=self.store.fingerprint,
                provenance={"identity": True})
        with self.lock:
            metric = self.metrics.get(metric_id)
        if metric is None:
            raise HTTPException(404, "unknown metric %r" % metric_id)
        return metric

    def row_for_upload(self, payload):
        if self.gaussianizer is None:
            raise HTTPException(503, "gaussianizer not loaded")
        if self.config.fingerprint() != self.store.fingerprint:
            raise HTTPException(503, "loaded config does not match the "
                                     "feature store fingerprint")
        try:
            clip = read_wav(io.BytesIO(payload),
                            target_rate=self.config.analysis.sample_rate,
                            clip_id="upload")
        except Exception:
            raise HTTPException(415, "payload is not decodable WAV audio")
        paths, vec = feature_row(clip, self.config.analysis)
        probe = build_store({"upload": vec}, paths,
                            self.gaussianizer.fingerprint)
        return apply_gaussianizer(probe, self.gaussianizer).row("upload")


def create_app(data_dir, config_path=None):
    state = SessionState(data_dir, config_path=config_path)
    app = FastAPI(title="scattersim")
    app.state.session = state

    def need_corpus():
        if state.corpus is None or not state.corpus.entries:
            raise HTTPException(503, "corpus not loaded")

    def need_store():
        if state.store is None:
            raise HTTPException(503, "feature store not loaded")

    @app.get("/v1/stimuli")
    def list_stimuli():
        need_corpus()
        canonical = set(CANONICAL_STIMULI)
        return [{"id": e.clip_id, "imt": e.imt.to_dict(),
                 "audio_url": "/v1/audio/%s" % e.clip_id,
                 "canonical": e.clip_id in canonical}
                for e in sorted(state.corpus.entries,
                                key=lambda e: e.clip_id)]

    @app.get("/v1/audio/{clip_id}")
    def get_audio(clip_id: str):
        need_corpus()
        try:
            entry = state.corpus.entry(clip_id)
        except KeyError:
            raise HTTPException(404, "unknown clip %r" % clip_id)
        return FileResponse(entry.path, media_type="audio/wav")

    @app.post("/v1/annotations", status_code=201)
    def submit_annotation(body: dict):
        need_corpus()
        try:
            annotation = Annotation(subject=body["subject"],
                                    assignments=body["assignments"])
            annotation_to_graph(annotation, state.stimulus_ids())
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(400, str(exc))
        stored = state.store_annotation(annotation)
        return {"id": stored, "subject": annotation.subject}

    @app.post("/v1/retrain/{subject}", status_code=202)
    def retrain(subject: str):
        need_store()
        with state.lock:
            known = subject in state.annotations
            any_known = bool(state.annotations)
        if subject == "consensus":
            if not any_known:
                raise HTTPException(404, "no annotations stored yet")
        elif not known:
            raise HTTPException(404, "unknown subject %r" % subject)
        job = state.start_retrain(subject)
        return job.to_dict()

    @app.get("/v1/jobs/{job_id}")
    def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(404, "unknown job %r" % job_id)
        return job.to_dict()

    @app.get("/v1/metrics")
    def list_metrics():
        need_store()
        with state.lock:
            entries = sorted(state.metrics.items())
        out = [{"id": "identity",
                "fingerprint": state.store.fingerprint}]
        out += [{"id": mid, "fingerprint": m.fingerprint,
                 "provenance": m.provenance} for mid, m in entries]
        return out

    @app.post("/v1/query")
    async def query(request: Request):
        need_store()
        content_type = request.headers.get("content-type", "")
        payload = None
        if content_type.startswith("multipart/"):
            form = await request.form()
            upload = form.get("file")
            fields = {k: form[k] for k in form if k != "file"}
            if upload is not None:
                payload = await upload.read()
        else:
            try:
                fields = await request.json()
            except Exception:
                raise HTTPException(400, "expected JSON or multipart body")
            if not isinstance(fields, dict):
                raise HTTPException(400, "expected a JSON object")
        clip_id = fields.get("id")
        metric = fields.get("metric", "identity")
        try:
            r = int(fields.get("r", 5))
        except (TypeError, ValueError):
            raise HTTPException(400, "r must be an integer")
        if r < 1:
            raise HTTPException(400, "r must be >= 1")
        mm = state.metric_for(metric)
        if payload is not None:
            row = state.row_for_upload(payload)
            result = knn_query(state.store, mm.matrix, row, r)
            query_name = "upload"
        elif clip_id:
            if clip_id not in state.store.clip_ids:
                raise HTTPException(404, "unknown clip %r" % clip_id)
            result = knn_query(state.store, mm.matrix, clip_id, r)
            query_name = clip_id
        else:
            raise HTTPException(400, "provide a clip id or a WAV upload")
        imt_of = {}
        if state.corpus:
            imt_of = {e.clip_id: e.imt.to_dict()
                      for e in state.corpus.entries}
        return JSONResponse({
            "query": query_name, "metric": metric, "r": r,
            "results": [{"id": cid, "distance": d,
                         "imt": imt_of.get(cid)}
                        for cid, d in result.results]})

    return app
