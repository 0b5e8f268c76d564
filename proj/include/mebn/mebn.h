/* mebn: multi-entity Bayesian network engine, C interface.
 *
 * Handles are opaque. Every call that can fail returns a mebn_status and
 * leaves a message for mebn_last_error() on the calling thread. Strings
 * returned through char** are owned by the caller and released with
 * mebn_free().
 */
#ifndef MEBN_H
#define MEBN_H

#include <stddef.h>

#if defined(_WIN32)
#define MEBN_API __declspec(dllexport)
#else
#define MEBN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct mebn_theory mebn_theory;
typedef struct mebn_evidence mebn_evidence;

typedef enum mebn_status {
  MEBN_OK = 0,
  MEBN_ERR_IO = 1,
  MEBN_ERR_PARSE = 2,
  MEBN_ERR_VALIDATION = 3,
  MEBN_ERR_GROUNDING = 4,
  MEBN_ERR_INFERENCE = 5,
  MEBN_ERR_ARGUMENT = 6,
  MEBN_ERR_INTERNAL = 7
} mebn_status;

typedef struct mebn_limits {
  size_t max_depth;
  size_t max_nodes;
  double max_parent_product;
} mebn_limits;

enum {
  MEBN_QUERY_ORACLE = 1u,    /* brute-force enumeration instead of elimination */
  MEBN_QUERY_NO_TIMING = 2u, /* report elapsed_ms as 0 */
  MEBN_QUERY_NO_PRUNE = 4u   /* infer on the unpruned network */
};

enum { MEBN_FORMAT_JSON = 0, MEBN_FORMAT_DOT = 1 };

MEBN_API mebn_limits mebn_limits_default(void);

MEBN_API mebn_status mebn_theory_open(const char* path, mebn_theory** out);
MEBN_API mebn_status mebn_theory_parse(const char* text, const char* origin, mebn_theory** out);
MEBN_API void mebn_theory_close(mebn_theory* theory);

/* Canonical text of the parsed theory. */
MEBN_API mebn_status mebn_theory_serialize(const mebn_theory* theory, char** text);

/* Validate over the theory's entities, or the evidence's when given.
 * Returns MEBN_ERR_VALIDATION when the report lists violations; the report
 * (text, or JSON when json != 0) is written either way. */
MEBN_API mebn_status mebn_theory_validate(const mebn_theory* theory, const mebn_evidence* evidence, int json,
                                          char** report);

MEBN_API mebn_status mebn_evidence_open(const mebn_theory* theory, const char* path, mebn_evidence** out);
MEBN_API mebn_status mebn_evidence_parse(const mebn_theory* theory, const char* text, const char* origin,
                                         mebn_evidence** out);
MEBN_API void mebn_evidence_close(mebn_evidence* evidence);

/* Posterior JSON: one object per target, or an array for several targets.
 * evidence may be NULL; limits may be NULL for the defaults; dot may be
 * NULL, otherwise it receives the pruned network in DOT form. */
MEBN_API mebn_status mebn_query(const mebn_theory* theory, const mebn_evidence* evidence,
                                const char* const* targets, size_t target_count, const mebn_limits* limits,
                                unsigned flags, char** json, char** dot);

/* The network built for the targets, as JSON or DOT. */
MEBN_API mebn_status mebn_ground(const mebn_theory* theory, const mebn_evidence* evidence,
                                 const char* const* targets, size_t target_count, const mebn_limits* limits,
                                 int format, int prune, char** out);

MEBN_API void mebn_free(void* p);
MEBN_API const char* mebn_last_error(void);
MEBN_API const char* mebn_status_name(mebn_status status);

#ifdef __cplusplus
}
#endif

#endif /* MEBN_H */
