"""Feature encoding: one-hot collection ids, numeric pass-through."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from metarec.meta_dataset import FeatureVector

NUMERIC = ("title_chars", "title_words", "hour_of_day")


class SchemaError(ValueError):
    pass


def check_schema(features: FeatureVector, schema) -> None:
    present = set(features.present())
    missing = [f for f in schema if f not in present]
    unexpected = [f for f in features.present() if f not in schema]
    if missing:
        raise SchemaError(f"missing feature(s) for model schema: {', '.join(missing)}")
    if unexpected:
        raise SchemaError(f"unexpected feature(s) for model schema: {', '.join(unexpected)}")


@dataclass
class Encoder:
    schema: tuple[str, ...]
    categories: list[str] = field(default_factory=list)
    mean: list[float] | None = None
    std: list[float] | None = None

    @classmethod
    def fit(cls, features: list[FeatureVector], schema, standardize: bool = False) -> "Encoder":
        schema = tuple(schema)
        cats = sorted({f.collection_id for f in features}) if "collection_id" in schema else []
        enc = cls(schema, cats)
        if standardize:
            raw = enc._numeric(features)
            mean = raw.mean(axis=0) if len(raw) else np.zeros(raw.shape[1])
            std = raw.std(axis=0) if len(raw) else np.ones(raw.shape[1])
            std = np.where(std > 0, std, 1.0)
            enc.mean, enc.std = mean.tolist(), std.tolist()
        return enc

    @property
    def numeric(self) -> tuple[str, ...]:
        return tuple(f for f in self.schema if f in NUMERIC)

    @property
    def n_columns(self) -> int:
        return len(self.categories) + len(self.numeric)

    def spans(self) -> dict[str, tuple[int, int]]:
        out, col = {}, 0
        for f in self.schema:
            width = len(self.categories) if f == "collection_id" else 1
            out[f] = (col, col + width)
            col += width
        return out

    def _numeric(self, features) -> np.ndarray:
        return np.array([[float(fv.get(f)) for f in self.numeric] for fv in features],
                        dtype=np.float64).reshape(len(features), len(self.numeric))

    def transform(self, features: list[FeatureVector]) -> np.ndarray:
        n = len(features)
        X = np.zeros((n, self.n_columns), dtype=np.float64)
        cat_pos = {c: i for i, c in enumerate(self.categories)}
        spans = self.spans()
        num = self._numeric(features)
        if self.mean is not None:
            num = (num - np.asarray(self.mean)) / np.asarray(self.std)
        for j, f in enumerate(self.numeric):
            X[:, spans[f][0]] = num[:, j]
        if "collection_id" in self.schema:
            start = spans["collection_id"][0]
            for i, fv in enumerate(features):
                c = cat_pos.get(fv.collection_id)
                if c is not None:  # unseen collections leave the block zero
                    X[i, start + c] = 1.0
        return X

    def to_dict(self) -> dict:
        return {"schema": list(self.schema), "categories": self.categories,
                "mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d) -> "Encoder":
        return cls(tuple(d["schema"]), list(d["categories"]), d.get("mean"), d.get("std"))
