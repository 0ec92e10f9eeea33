# FILE: app/repositories/base.py
# ============================================================================
import re
import shutil
from pathlib import Path
from typing import Generic, List, Optional, Type, TypeVar

from pydantic import BaseModel

from app.exceptions import InvalidArgumentError

ModelType = TypeVar("ModelType", bound=BaseModel)

_RECORD_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class BaseRepository(Generic[ModelType]):
    """Records stored as one JSON document per directory under a root."""

    def __init__(self, model: Type[ModelType], root: Path, document: str):
        self.model = model
        self.root = Path(root)
        self.document = document

    def record_dir(self, id: str) -> Path:
        if not _RECORD_ID.match(id):
            raise InvalidArgumentError(f"invalid record id: {id!r}")
        return self.root / id

    def exists(self, id: str) -> bool:
        return self.record_dir(id).is_dir()

    def get_by_id(self, id: str) -> Optional[ModelType]:
        """Get a record by ID."""
        path = self.record_dir(id) / self.document
        if not path.is_file():
            return None
        return self.model.model_validate_json(path.read_text())

    def list_ids(self) -> List[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.parent.name for p in self.root.glob(f"*/{self.document}"))

    def get_all(self, skip: int = 0, limit: int = 100) -> List[ModelType]:
        """Get all records with pagination."""
        ids = self.list_ids()[skip:skip + limit]
        return [record for record in map(self.get_by_id, ids) if record is not None]

    def create(self, id: str, obj_in: ModelType) -> ModelType:
        """Create or overwrite a record."""
        directory = self.record_dir(id)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / self.document).write_text(obj_in.model_dump_json(indent=2))
        return obj_in

    def delete(self, id: str) -> bool:
        """Delete a record by ID."""
        directory = self.record_dir(id)
        if directory.is_dir():
            shutil.rmtree(directory)
            return True
        return False
