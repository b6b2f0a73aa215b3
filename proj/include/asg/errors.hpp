#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace asg {

// Base class for every error the library raises. The CLI maps subclasses to
// exit codes, so new error types should derive from one of the classes below
// rather than from Error directly unless they introduce a new failure class.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or ill-typed input document (graph JSON, exchange JSON, model
// file, rule catalog). Carries the byte offset where parsing stopped (0 when
// the failure is semantic rather than lexical) and a dotted field path such
// as "edges[3].kind" when one is known.
class SchemaError : public Error {
public:
    SchemaError(const std::string& msg, std::size_t byte_offset = 0,
                std::string field_path = {})
        : Error(format(msg, byte_offset, field_path)),
          byte_offset_(byte_offset),
          field_path_(std::move(field_path)) {}

    std::size_t byte_offset() const { return byte_offset_; }
    const std::string& field_path() const { return field_path_; }

private:
    static std::string format(const std::string& msg, std::size_t off,
                              const std::string& path) {
        std::string out = msg;
        if (!path.empty()) out += " (at " + path + ")";
        if (off != 0) out += " (byte " + std::to_string(off) + ")";
        return out;
    }

    std::size_t byte_offset_;
    std::string field_path_;
};

// A node id was passed to a graph query but is not declared in the graph.
class NodeNotFound : public Error {
public:
    explicit NodeNotFound(const std::string& id)
        : Error("node not found: " + id), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

// Coreference chain that never reaches a canonical mention.
class CorefCycleError : public Error {
public:
    explicit CorefCycleError(std::vector<std::string> cycle)
        : Error("coreference cycle: " + join(cycle)), cycle_(std::move(cycle)) {}
    const std::vector<std::string>& cycle() const { return cycle_; }

private:
    static std::string join(const std::vector<std::string>& ids) {
        std::string out;
        for (const auto& id : ids) {
            if (!out.empty()) out += " -> ";
            out += id;
        }
        return out;
    }

    std::vector<std::string> cycle_;
};

// Training corpus is unusable: empty, or contains a graph that fails
// rationality verification (graph_name names the offender in that case).
class CorpusError : public Error {
public:
    explicit CorpusError(const std::string& detail, std::string graph_name = {})
        : Error("training corpus rejected: " + detail),
          graph_name_(std::move(graph_name)) {}
    const std::string& graph_name() const { return graph_name_; }

private:
    std::string graph_name_;
};

// Generator model is missing, untrained, or incompatible with this build.
class ModelError : public Error {
public:
    explicit ModelError(const std::string& msg) : Error(msg) {}
};

// A verification report was paired with a graph it was not computed from.
class ReportMismatch : public Error {
public:
    explicit ReportMismatch(const std::string& msg) : Error(msg) {}
};

// Protected text or its match table was altered, so the original document
// cannot be reconstructed.
class RestoreError : public Error {
public:
    explicit RestoreError(const std::string& msg) : Error(msg) {}
};

// Unknown graph embedding scheme name.
class SchemeError : public Error {
public:
    explicit SchemeError(const std::string& scheme)
        : Error("unknown embedding scheme: " + scheme) {}
};

// Filesystem-level failure (unreadable input, unwritable output).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace asg
