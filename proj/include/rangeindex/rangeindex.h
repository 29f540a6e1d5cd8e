#ifndef RANGEINDEX_H
#define RANGEINDEX_H

/* C interface to the range index library. Handles are opaque; every call
 * that can fail returns an ri_status and leaves a message for
 * ri_last_error() on the calling thread. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define RI_API __declspec(dllexport)
#else
#define RI_API __attribute__((visibility("default")))
#endif

typedef enum ri_status {
    RI_OK = 0,
    RI_INVALID_ARGUMENT = 1,
    RI_CORRUPT = 2,
    RI_ADDRESS = 3,
    RI_PRECONDITION = 4,
    RI_PARSE = 5,
    RI_UNSUPPORTED = 6,
    RI_IO = 7,
    RI_MISMATCH = 8, /* a workload query disagreed with the reference */
    RI_INTERNAL = 9
} ri_status;

typedef enum ri_kind { RI_UNIFORM = 0, RI_STATIC = 1, RI_DYNAMIC = 2 } ri_kind;

typedef enum ri_variant { RI_DIRECT_APPEND = 0, RI_BUFFERED_APPEND = 1, RI_FULLY_DYNAMIC = 2 } ri_variant;

typedef struct ri_index ri_index;
typedef struct ri_result ri_result;

typedef struct ri_config {
    uint64_t block_bits;  /* B */
    uint64_t memory_bits; /* M */
    uint64_t n_max;
} ri_config;

typedef struct ri_io_stats {
    uint64_t reads;
    uint64_t writes;
} ri_io_stats;

typedef struct ri_info {
    ri_kind kind;
    ri_variant variant; /* dynamic only */
    uint64_t n;
    uint32_t sigma;
    uint64_t seed;
    ri_config config;
    unsigned height;
    unsigned hash_levels; /* static only */
} ri_info;

typedef struct ri_space {
    uint64_t total_bits;     /* device bits in use */
    uint64_t data_bits;      /* bitmap payload */
    uint64_t structure_bits; /* directories, tree pages, node blocks */
    uint64_t hashed_bits;    /* static only */
    uint64_t memory_bits;    /* internal-memory state */
    double h0;               /* entropy of the indexed string, bits per character */
} ri_space;

typedef struct ri_dynamic_stats {
    uint64_t updates;
    uint64_t update_io;
    uint64_t rebuilds;
    uint64_t rebuild_io;
    uint64_t global_rebuilds;
    uint64_t compactions;
    uint64_t flushes;
} ri_dynamic_stats;

typedef struct ri_workload_report {
    uint64_t ops;
    uint64_t updates;
    uint64_t queries;
    uint64_t approx_queries;
    uint64_t mismatches;
    uint64_t first_mismatch_line; /* 0 when none */
    uint64_t false_positives;     /* approximate queries */
    uint64_t negatives_checked;   /* approximate queries: non-members tested */
    uint64_t update_io;
    uint64_t query_io;
} ri_workload_report;

RI_API const char* ri_last_error(void);
RI_API const char* ri_status_name(ri_status status);
RI_API void ri_config_default(ri_config* config);

/* Characters must lie in [0, sigma). `variant` is ignored unless kind is RI_DYNAMIC. */
RI_API ri_status ri_build(const uint32_t* x, uint64_t n, uint32_t sigma, ri_kind kind, ri_variant variant,
                          const ri_config* config, uint64_t seed, ri_index** out);
/* Writes manifest.txt and a data file into an existing directory. */
RI_API ri_status ri_save(const ri_index* index, const char* dir);
RI_API ri_status ri_load(const char* dir, ri_index** out);
RI_API void ri_free(ri_index* index);

/* Extra manifest entries, persisted by ri_save. Keys are [a-z0-9_.]+. */
RI_API ri_status ri_set_meta(ri_index* index, const char* key, const char* value);
/* Copies the value with a terminating NUL; *len receives the full length. */
RI_API ri_status ri_get_meta(const ri_index* index, const char* key, char* buf, size_t cap, size_t* len);

RI_API ri_status ri_get_info(const ri_index* index, ri_info* out);
RI_API ri_status ri_get_space(const ri_index* index, ri_space* out);
RI_API ri_status ri_get_io_stats(const ri_index* index, ri_io_stats* out);
RI_API void ri_reset_io_stats(ri_index* index);
RI_API ri_status ri_get_dynamic_stats(const ri_index* index, ri_dynamic_stats* out);

RI_API ri_status ri_count(ri_index* index, uint32_t lo, uint32_t hi, uint64_t* out);
RI_API ri_status ri_query(ri_index* index, uint32_t lo, uint32_t hi, ri_result** out);
/* Static and dynamic indexes only. */
RI_API ri_status ri_query_approx(ri_index* index, uint32_t lo, uint32_t hi, double epsilon, ri_result** out);

RI_API ri_status ri_append(ri_index* index, uint32_t ch);
RI_API ri_status ri_change(ri_index* index, uint64_t i, uint32_t ch);
RI_API ri_status ri_delete(ri_index* index, uint64_t i);

/* The current string, read without charging I/O. */
RI_API ri_status ri_peek_string(const ri_index* index, uint32_t* buf, uint64_t cap, uint64_t* n);
/* Structural self-check; RI_PRECONDITION on a broken invariant. */
RI_API ri_status ri_check(const ri_index* index);

/* Runs a workload (one operation per line: A c | C i c | D i | Q lo hi |
 * QA lo hi eps) against the index and checks every query against a
 * brute-force reference over the same logical string. */
RI_API ri_status ri_run_workload(ri_index* index, const char* text, ri_workload_report* report);

/* Results. For an approximate result the members are the preimage of the
 * hashed set, which contains every true position. */
RI_API int ri_result_is_exact(const ri_result* r);
RI_API unsigned ri_result_level(const ri_result* r); /* hash level j, 0 if exact */
RI_API uint64_t ri_result_universe(const ri_result* r);
RI_API uint64_t ri_result_set_cardinality(const ri_result* r); /* of the stored set (hashed or exact) */
RI_API uint64_t ri_result_compressed_bits(const ri_result* r);
/* Stored set payload as bytes, most significant bit first, zero padded. */
RI_API ri_status ri_result_payload(const ri_result* r, uint8_t* buf, size_t cap, size_t* len);
RI_API ri_status ri_result_contains(const ri_result* r, uint64_t i, int* out);
/* Enumerates members in increasing order; *count receives the total. */
RI_API ri_status ri_result_members(const ri_result* r, uint64_t* buf, uint64_t cap, uint64_t* count);
RI_API void ri_result_free(ri_result* r);

#ifdef __cplusplus
}
#endif

#endif
