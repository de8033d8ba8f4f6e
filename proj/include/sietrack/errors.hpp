#pragma once

#include <stdexcept>
#include <string>

namespace sietrack {

// Tensor/feature-map dimensions do not match what an operation requires.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Annotation or label file could not be parsed. Carries file and line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, int line, const std::string& msg)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + msg),
          file_(file), line_(line) {}
    const std::string& file() const { return file_; }
    int line() const { return line_; }

private:
    std::string file_;
    int line_;
};

// Dataset layout is inconsistent (e.g. frame/annotation count mismatch).
class StructuralError : public std::runtime_error {
public:
    explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

// A sequence cannot produce training pairs (too few visible frames, or the
// retry budget ran out). Callers skip the sequence.
class UnsampleableSequenceError : public std::runtime_error {
public:
    explicit UnsampleableSequenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint file is corrupt or belongs to a different configuration.
class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

// The tracked target left the frame entirely; no search region exists.
class LostTargetError : public std::runtime_error {
public:
    explicit LostTargetError(const std::string& msg) : std::runtime_error(msg) {}
};

// The network produced a non-finite output mid-track. The last good state is
// kept by the tracker so the caller can decide what to do.
class TrackingFailureError : public std::runtime_error {
public:
    explicit TrackingFailureError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training loss became non-finite. Carries the optimizer step for diagnosis.
class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError(int step, const std::string& msg)
        : std::runtime_error("step " + std::to_string(step) + ": " + msg), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

}  // namespace sietrack
