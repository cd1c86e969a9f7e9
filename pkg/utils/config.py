from pydantic_settings import BaseSettings
from typing import Optional

class Settings(BaseSettings):
    # Logging (PREIMAGE_LOG)
    log: str = "WARNING"
    
    # Linear solving
    pivoting: bool = True
    project_unreachable: bool = True
    
    # Branch budget
    max_branches: Optional[int] = None
    max_forks: Optional[int] = None
    strict_budget: bool = False
    threads: int = 1
    
    # Verification sampling
    samples: int = 8
    seed: int = 0
    hint_range: int = 20
    
    class Config:
        env_prefix = "PREIMAGE_"
        env_file = ".env"
        extra = "ignore"  # Ignore extra fields from environment

settings = Settings()
