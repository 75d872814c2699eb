"""
Pydantic models for configuration validation
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class DataConfig(BaseModel):
    """Dataset locations (UCI "Inertial Signals" layout)"""
    train_signals: List[str] = Field(default_factory=list, description="One signal file per channel (training)")
    train_labels: Optional[str] = Field(None, description="Training label file")
    train_subjects: Optional[str] = Field(None, description="Optional training subject file")
    test_signals: List[str] = Field(default_factory=list, description="One signal file per channel (test)")
    test_labels: Optional[str] = Field(None, description="Test label file")
    test_subjects: Optional[str] = Field(None, description="Optional test subject file")
    label_offset: int = Field(0, description="Subtracted from raw labels (1 for the raw UCI files)")

    @model_validator(mode="after")
    def check_pairs(self):
        if self.train_signals and not self.train_labels:
            raise ValueError("train_signals given without train_labels")
        if self.test_signals and not self.test_labels:
            raise ValueError("test_signals given without test_labels")
        return self


class PipelineConfig(BaseModel):
    """Template selection and classification settings"""
    distance: Literal["dtw", "dtwsubseq"] = Field("dtwsubseq", description="Distance kind")
    averaging: Literal["dpa", "dba"] = Field("dpa", description="Template averaging method")
    cut: float = Field(0.25, gt=0.0, le=1.0, description="Cluster diameter bound as a fraction of d_max")
    bw: int = Field(8, ge=0, description="DTW bandwidth")
    dw: Optional[int] = Field(None, ge=1, description="Displacement window (no default; required to compute distances)")
    pca_variance: float = Field(0.95, gt=0.0, le=1.0, description="Variance retained by PCA")
    svm_c: float = Field(1.0, gt=0.0, description="SVM regularization parameter")
    svm_epochs: int = Field(1000, ge=1, description="SVM solver iteration cap")
    seed: int = Field(0, ge=0, description="Seed for DBA initialisation and the SVM solver")
    dba_max_iters: int = Field(10, ge=1, description="DBA iteration cap")
    dba_tol: float = Field(1e-6, ge=0.0, description="DBA relative objective decrease threshold")
    flat_quantile: Optional[float] = Field(0.05, gt=0.0, lt=1.0, description="Flat-curve quantile; null disables")
    merged_static: bool = Field(True, description="Report merged-static accuracy on UCI label sets")
    threads: int = Field(1, ge=1, description="Worker threads for distances and features")


class SynthConfig(BaseModel):
    """Synthetic dataset generation"""
    train_per_activity: int = Field(200, ge=1, description="Training samples per activity")
    test_per_activity: int = Field(50, ge=1, description="Test samples per activity")
    activities: int = Field(4, ge=1, le=4, description="Number of activities (walking, upstairs, downstairs, sitting)")
    fft_length: int = Field(256, ge=2, description="FFT length")
    noise_length: int = Field(10, ge=1, description="Length of the spectral noise vector")
    noise_scale: float = Field(5.0, ge=0.0, description="Noise dispersion parameter")
    noise_scale_kind: Literal["variance", "std"] = Field("variance", description="How noise_scale is read")
    noise_mode: Literal["real", "complex"] = Field("real", description="Perturb real parts or real+imaginary")
    series_length: int = Field(128, ge=2, description="Output series length")
    seed: int = Field(0, ge=0, description="Generator seed")
    per_sample_seeds: bool = Field(False, description="Derive one generator per (seed, split, label, index)")
    sources: Optional[str] = Field(None, description="Template-set file providing source templates")
    source_channel: int = Field(0, ge=0, description="Channel taken from multi-channel source templates")
    variants: int = Field(2, ge=2, description="Bundled pseudo-activity variants per activity")

    @field_validator("fft_length")
    @classmethod
    def check_power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError(f"fft_length must be a power of two, got {value}")
        return value

    @model_validator(mode="after")
    def check_lengths(self):
        if self.fft_length < 2 * self.series_length:
            raise ValueError(
                f"fft_length {self.fft_length} must be >= 2 * series_length ({2 * self.series_length})"
            )
        if self.noise_length > self.fft_length:
            raise ValueError(f"noise_length {self.noise_length} exceeds fft_length {self.fft_length}")
        return self

    @property
    def noise_std(self) -> float:
        if self.noise_scale_kind == "variance":
            return self.noise_scale ** 0.5
        return self.noise_scale


class LoggingConfig(BaseModel):
    """Logging configuration"""
    level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field("INFO", description="Log level")
    file: Optional[str] = Field(None, description="Log file path; null logs to stderr only")


class RunConfig(BaseModel):
    """Complete effective configuration"""
    data: DataConfig = Field(default_factory=DataConfig)
    pipeline: PipelineConfig
    synth: SynthConfig = Field(default_factory=SynthConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
